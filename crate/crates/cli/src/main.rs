use clap::Parser;

fn main() -> anyhow::Result<()> {
    downselect_cli::execute(downselect_cli::Cli::parse())
}
