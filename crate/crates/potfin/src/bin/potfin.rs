use std::process::ExitCode;

fn main() -> ExitCode {
    // Placeholder until the command line lands.
    eprintln!("potfin: command line not wired up yet");
    ExitCode::from(2)
}
