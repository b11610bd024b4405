fn main() {
    std::process::exit(throw_inertia::cli::run(std::env::args_os()));
}
