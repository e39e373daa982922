use clap::Parser;

fn main() -> anyhow::Result<()> {
    markpp_cli::run(markpp_cli::Cli::parse())
}
