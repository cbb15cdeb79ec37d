fn main() {
    std::process::exit(gallery_bench::cli::main(std::env::args_os()));
}
