use clap::error::ErrorKind;
use clap::Parser;
use qbrachy_cli::{run, Cli};

fn error_json(message: String) -> i32 {
    let report = serde_json::json!({ "status": "error", "message": message });
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    1
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprint!("{e}");
            std::process::exit(error_json(e.kind().to_string()));
        }
    };
    let code = match run(&cli) {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.report).expect("serializable report")
            );
            outcome.exit_code()
        }
        Err(err) => error_json(format!("{err:#}")),
    };
    std::process::exit(code);
}
