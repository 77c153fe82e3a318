use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    match torus_zeros_cli::run(std::env::args().collect()) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(report.to_json().as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(2);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if let Some(ce) = e.downcast_ref::<clap::Error>() {
                if !ce.use_stderr() {
                    let _ = ce.print();
                    return ExitCode::SUCCESS;
                }
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
