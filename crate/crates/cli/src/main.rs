fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let stdout = std::io::stdout();
    std::process::exit(capstruct_cli::run_command(&args, &mut stdout.lock()));
}
