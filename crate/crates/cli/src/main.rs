use std::process::ExitCode;

use alea_cli::{cmd_compare, cmd_inject, cmd_run, cmd_synth, configure_threads, prepare_serve, Cli, CliError, Command};
use clap::Parser;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    let stdout = std::io::stdout();
    match command {
        Command::Run(args) => cmd_run(&args, stdout.lock()).map(drop),
        Command::Compare(args) => cmd_compare(&args, stdout.lock()).map(drop),
        Command::Inject(args) => {
            let n = cmd_inject(&args)?;
            println!("removed {n} KG2 counterparts; wrote {}", args.out.display());
            Ok(())
        }
        Command::Synth(args) => {
            cmd_synth(&args)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
        Command::Serve(args) => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Startup(e.to_string()))?;
            rt.block_on(async {
                let (listener, state) = prepare_serve(&args).await?;
                let addr = listener.local_addr().map_err(|e| CliError::Startup(e.to_string()))?;
                println!("listening on http://{addr}");
                alea_service::serve(listener, state)
                    .await
                    .map_err(|e| CliError::Startup(e.to_string()))
            })
        }
    }
}
