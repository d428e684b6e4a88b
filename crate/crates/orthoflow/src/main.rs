fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORTHOFLOW_LOG", "warn")).init();
    std::process::exit(orthoflow::cli::run(std::env::args_os()));
}
