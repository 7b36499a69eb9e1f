fn main() {
    std::process::exit(mtl_prognostics::cli::run(std::env::args_os()));
}
