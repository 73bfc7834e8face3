fn main() {
    std::process::exit(shape_motif::cli::run(std::env::args_os()));
}
