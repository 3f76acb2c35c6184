use clap::Parser;
use slabfft_cli::args::{Cli, Command};
use slabfft_cli::{bench, compare, verify, CliError};

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify(args) => verify::cmd_verify(&args, &mut std::io::stdout().lock()).map(drop),
        // CSV may own stdout, so the summary goes to stderr.
        Command::Bench(args) => bench::cmd_bench(&args, &mut std::io::stderr().lock()).map(drop),
        Command::Compare(args) => compare::cmd_compare(&args, &mut std::io::stdout().lock()).map(drop),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("slabfft: {e}");
        std::process::exit(e.exit_code());
    }
}
