fn main() {
    std::process::exit(crew_resched::cli::run(std::env::args_os()));
}
