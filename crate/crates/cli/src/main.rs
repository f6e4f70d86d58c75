mod commands;
mod io;
mod schedule;

use clap::Parser;

fn main() {
    // FRAG_THREADS caps internal parallelism; unset means the rayon default
    if let Ok(value) = std::env::var("FRAG_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }

    let cli = commands::Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => {}
        Err(io::CliError::Usage(message)) => {
            eprintln!("error: {message}");
            std::process::exit(2);
        }
        Err(io::CliError::Data { code, message }) => {
            eprintln!(
                "{}",
                serde_json::json!({ "version": 1, "error": code, "message": message })
            );
            std::process::exit(1);
        }
    }
}
