use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let threads = std::env::var("RMX_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("cannot configure {threads} worker threads: {e}");
        }
    }
    let code = rmx_cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
