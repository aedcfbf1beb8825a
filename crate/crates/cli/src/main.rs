fn main() {
    std::process::exit(nthought_cli::dispatch(std::env::args_os()));
}
