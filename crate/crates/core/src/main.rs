fn main() {
    std::process::exit(metricbundle::cli::run(std::env::args_os()));
}
