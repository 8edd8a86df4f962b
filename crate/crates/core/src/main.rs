fn main() { depthpose::cli::run_placeholder(); }
