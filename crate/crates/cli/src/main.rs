use std::process::ExitCode;

use clap::Parser;
use kf_cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KF_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            if code != 0 {
                let msg = e.to_string().lines().next().unwrap_or("").replace('\t', " ");
                eprintln!("kf-error\tcode=1\tkind=usage\tmessage={msg}");
            }
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
