use std::io::Write;

fn main() {
    let wants_logs = std::env::args().nth(1).as_deref() == Some("serve");
    if wants_logs {
        tracing_subscriber::fmt()
            .with_env_filter(
                tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
            )
            .with_writer(std::io::stderr)
            .init();
    }
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let status = cloudgate_cli::run(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    std::process::exit(status.code());
}
