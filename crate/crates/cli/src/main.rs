mod args;
mod exit;
mod run;

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = args::Cli::parse();
    let resolved = match &cli.replay {
        Some(path) => run::load_replay(path, &cli),
        None => run::resolve(&cli),
    };
    let code = match resolved.and_then(|rc| run::execute(&rc)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    std::process::exit(code);
}
