fn main() {
  std::process::exit(hermite_trend::cli::run(std::env::args_os()));
}
