fn main() {
    std::process::exit(bosonlight::cli::main_with_args(std::env::args_os()));
}
