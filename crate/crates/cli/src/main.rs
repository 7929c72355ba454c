use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyparse::anytime::StrategyParams;
use anyparse_cli::{
    cmd_check, cmd_parse, cmd_replay, exit, CliError, Format, Mode, RunConfig, Until,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Anytime chart parsing over word lattices.
#[derive(Parser)]
#[command(name = "anyparse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a lattice in batch or anytime mode.
    Parse(ParseArgs),
    /// Drive a fresh producer with a consumer script.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        /// Consumer script: `poll <t>`, `abort <t>`, `reset <t> <lattice>`.
        #[arg(long)]
        script: PathBuf,
    },
    /// Validate a grammar and lexicon without parsing.
    Check {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// Also warn when this category is never produced.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Batch)]
    mode: ModeArg,
    /// Give up after this long (transactions with --deterministic).
    #[arg(long)]
    deadline: Option<u64>,
    /// Stop at the first complete analysis or only when the producer is done.
    #[arg(long, value_enum, default_value_t = UntilArg::Complete)]
    until: UntilArg,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    lattice: PathBuf,
    #[arg(long, default_value = "S")]
    start: String,
    /// Milliseconds between polls (transactions with --deterministic).
    #[arg(long, default_value_t = 5)]
    poll_interval: u64,
    /// Milliseconds between hypotheses; 0 gives the producer the whole lattice.
    #[arg(long, default_value_t = 0)]
    feed_interval: u64,
    /// Publish as soon as a new passive edge appears.
    #[arg(long)]
    fragment_first: bool,
    /// Transactions between regular publications.
    #[arg(long, default_value_t = 1)]
    publish_every: u32,
    /// Agenda width.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Lockstep producer and transaction-count triggers; no timings.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Batch,
    Anytime,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    JsonLines,
}

#[derive(Clone, Copy, ValueEnum)]
enum UntilArg {
    Complete,
    Quiescent,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::JsonLines => Format::JsonLines,
        }
    }
}

impl RunArgs {
    fn config(self) -> RunConfig {
        let mut params = StrategyParams::new(&self.start);
        params.fragment_first = self.fragment_first;
        params.publish_every = self.publish_every;
        params.beam = self.beam;
        let mut cfg = RunConfig::new(self.grammar, self.lexicon, self.lattice);
        cfg.poll_interval = self.poll_interval;
        cfg.feed_interval_ms = self.feed_interval;
        cfg.params = params;
        cfg.format = self.format.into();
        cfg.deterministic = self.deterministic;
        cfg
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    match cli.command {
        Command::Parse(args) => {
            let mut cfg = args.run.config();
            cfg.mode = match args.mode {
                ModeArg::Batch => Mode::Batch,
                ModeArg::Anytime => Mode::Anytime,
            };
            cfg.deadline = args.deadline;
            cfg.until = match args.until {
                UntilArg::Complete => Until::Complete,
                UntilArg::Quiescent => Until::Quiescent,
            };
            cmd_parse(&cfg, out)
        }
        Command::Replay { run, script } => cmd_replay(&run.config(), &script, out),
        Command::Check {
            grammar,
            lexicon,
            start,
            format,
        } => cmd_check(&grammar, &lexicon, start.as_deref(), format.into(), out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            for line in e.lines() {
                eprintln!("anyparse: {line}");
            }
            e.exit_code()
        }
    };
    let _ = out.flush();
    if code == exit::VOID {
        eprintln!("anyparse: deadline passed with no result");
    }
    ExitCode::from(code)
}
