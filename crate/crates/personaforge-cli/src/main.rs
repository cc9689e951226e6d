use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use personaforge_cli::commands;
use personaforge_cli::config::{Config, Context};
use personaforge_cli::CliResult;

/// Prompt language models with Big Five personality profiles and measure
/// how faithfully they simulate them: questionnaire answering, judged text
/// generation, and lexical pattern analysis.
#[derive(Parser)]
#[command(name = "personaforge", version, about)]
struct Cli {
    /// Configuration file (default: ./personaforge.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config file.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Sampling seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for provider calls, overriding the config file.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Provider name from the config, overriding `default_provider`.
    #[arg(long, global = true)]
    provider: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Administer the questionnaire for every trait and level; write runs,
    /// score histograms, and reliability coefficients.
    Questionnaire {
        /// Repetitions per item.
        #[arg(long)]
        repetitions: Option<u32>,
        /// Sampling temperature, e.g. "0" or "0.7".
        #[arg(long)]
        temperature: Option<String>,
    },
    /// Generate trait-conditioned texts over the configured grid and/or
    /// sampled full profiles, masking trait leakage.
    Generate {
        /// single, full, or both.
        #[arg(long)]
        mode: Option<String>,
        /// Comma-separated prompt scores, e.g. "1,5".
        #[arg(long, value_delimiter = ',')]
        scores: Option<Vec<u8>>,
        /// Comma-separated temperatures, e.g. "0,0.7".
        #[arg(long, value_delimiter = ',')]
        temps: Option<Vec<String>>,
        /// Sampled full profiles.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Judge generated texts per trait with the configured classifier.
    Classify {
        /// Generated-texts file (default: `<out-dir>/generated_texts.jsonl`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// prompted (profile traits only) or all (all five).
        #[arg(long)]
        traits: Option<String>,
    },
    /// Compare classifier verdicts against prompted profiles and, when
    /// annotations are supplied, human judgments.
    Evaluate {
        /// Generated-texts file.
        #[arg(long)]
        texts: Option<PathBuf>,
        /// Classifier-outputs file.
        #[arg(long)]
        outputs: Option<PathBuf>,
        /// Human annotations JSONL.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Lexical similarity neighborhoods, lexicon tables, and overlaps.
    Linguistics {
        /// Generated-texts file.
        #[arg(long)]
        texts: Option<PathBuf>,
        /// Neighbors averaged per text.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Consolidated Markdown summary of every report in the output dir.
    Report,
}

fn build_context(cli: &Cli) -> CliResult<Context> {
    let (config, config_path) = Config::load(cli.config.as_deref())?;
    let mut context = Context::new(config, config_path.as_deref())?;
    if let Some(out_dir) = &cli.out_dir {
        context.out_dir = out_dir.clone();
    }
    if let Some(seed) = cli.seed {
        context.seed = seed;
    }
    if let Some(workers) = cli.workers {
        context.workers = workers.max(1);
    }
    if let Some(provider) = &cli.provider {
        context.config.provider_section(provider)?;
        context.provider_name = provider.clone();
    }
    // Keep the manifest's config snapshot in sync with the overrides.
    context.config.run.out_dir = context.out_dir.clone();
    context.config.run.seed = context.seed;
    context.config.run.workers = context.workers;
    context.config.default_provider = context.provider_name.clone();
    Ok(context)
}

fn run(cli: Cli) -> CliResult<i32> {
    let context = build_context(&cli)?;
    match cli.command {
        Command::Questionnaire {
            repetitions,
            temperature,
        } => commands::questionnaire::run(
            context,
            commands::questionnaire::Args {
                repetitions,
                temperature,
            },
        ),
        Command::Generate {
            mode,
            scores,
            temps,
            count,
        } => commands::generate::run(
            context,
            commands::generate::Args {
                mode,
                scores,
                temperatures: temps,
                count,
            },
        ),
        Command::Classify { input, traits } => {
            commands::classify::run(context, commands::classify::Args { input, traits })
        }
        Command::Evaluate {
            texts,
            outputs,
            annotations,
        } => commands::evaluate::run(
            context,
            commands::evaluate::Args {
                texts,
                outputs,
                annotations,
            },
        ),
        Command::Linguistics { texts, k } => {
            commands::linguistics::run(context, commands::linguistics::Args { texts, k })
        }
        Command::Report => commands::report::run(context),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
