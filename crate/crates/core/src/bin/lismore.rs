use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use lismore::cli::{self, ExperimentConfig, KEYS};
use lismore::corpus::parallel_to_tsv;
use lismore::{Error, Result};

const BOOL_KEYS: [&str; 2] = ["augment", "dedup_words"];

/// `--config FILE` plus one flag per config key.
fn with_config_args(cmd: Command) -> Command {
    let mut cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("experiment config (key = value lines)"),
    );
    for (key, help) in KEYS {
        let mut arg = Arg::new(*key).long(*key).value_name("VALUE").help(*help);
        if key.contains('_') {
            arg = arg.alias(key.replace('_', "-"));
        }
        if BOOL_KEYS.contains(key) {
            arg = arg.num_args(0..=1).default_missing_value("true");
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

fn split_arg(default: &'static [&'static str]) -> Arg {
    Arg::new("split")
        .long("split")
        .value_parser(["train", "eval", "test"])
        .action(ArgAction::Append)
        .default_values(default)
        .help("data split")
}

fn command() -> Command {
    Command::new("lismore")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Character-level transliteration experiments")
        .subcommand_required(true)
        .subcommand(with_config_args(Command::new("pretrain").about("denoising pretraining on a word list")))
        .subcommand(with_config_args(Command::new("finetune").about("train on parallel word pairs")))
        .subcommand(with_config_args(
            Command::new("evaluate")
                .about("corpus character BLEU of a checkpoint")
                .arg(split_arg(&["eval", "test"])),
        ))
        .subcommand(with_config_args(
            Command::new("translit")
                .about("transliterate text word by word")
                .arg(Arg::new("text").long("text").help("a single line to transliterate"))
                .arg(Arg::new("input").long("input").value_name("FILE").help("file of lines (default: stdin)")),
        ))
        .subcommand(with_config_args(
            Command::new("error-analysis")
                .about("the k worst-scoring examples")
                .arg(split_arg(&["test"]).action(ArgAction::Set)),
        ))
        .subcommand(
            Command::new("validate")
                .about("check words against the broad/slender spelling rule")
                .arg(Arg::new("file").required(true).help("one word per line")),
        )
        .subcommand(with_config_args(
            Command::new("augment")
                .about("add heterograph spellings to a parallel file")
                .arg(Arg::new("output").long("output").value_name("FILE").help("augmented TSV (default: stdout)")),
        ))
        .subcommand(with_config_args(Command::new("stats").about("parallel data statistics")))
}

fn build_config(m: &ArgMatches) -> Result<ExperimentConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn read_lines(m: &ArgMatches) -> Result<Vec<String>> {
    if let Some(t) = m.get_one::<String>("text") {
        return Ok(vec![t.clone()]);
    }
    let lines: io::Result<Vec<String>> = match m.get_one::<String>("input") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: PathBuf::from(path),
                source: e,
            })?;
            Ok(text.lines().map(str::to_string).collect())
        }
        None => io::stdin().lock().lines().collect(),
    };
    lines.map_err(|e| Error::Io {
        path: PathBuf::from("<stdin>"),
        source: e,
    })
}

fn run(matches: &ArgMatches) -> Result<String> {
    let (name, m) = matches.subcommand().expect("subcommand required");
    if name == "validate" {
        let path = PathBuf::from(m.get_one::<String>("file").expect("required"));
        let summary = cli::cmd_validate(&path)?;
        let fraction = summary
            .fraction_valid()
            .map_or_else(|| "n/a".to_string(), |f| format!("{f:.4}"));
        eprintln!(
            "valid {}, invalid {}, n/a {}, fraction valid {fraction}",
            summary.valid, summary.invalid, summary.not_assessable
        );
        return Ok(summary.to_tsv());
    }
    let cfg = build_config(m)?;
    match name {
        "pretrain" => Ok(cli::cmd_pretrain(&cfg)?.summary.join("\n") + "\n"),
        "finetune" => Ok(cli::cmd_finetune(&cfg)?.summary.join("\n") + "\n"),
        "evaluate" => {
            let splits: Vec<&str> = m.get_many::<String>("split").expect("default").map(String::as_str).collect();
            let scores = cli::cmd_evaluate(&cfg, &splits)?;
            Ok(format!("{}{}\n", cli::scores_tsv(&scores), cli::table_row(&cfg, &scores)))
        }
        "translit" => Ok(cli::cmd_translit(&cfg, &read_lines(m)?)?
            .iter()
            .map(|l| format!("{l}\n"))
            .collect()),
        "error-analysis" => {
            let split = m.get_one::<String>("split").expect("default");
            Ok(cli::cmd_error_analysis(&cfg, split)?.to_string())
        }
        "augment" => {
            let (examples, report) = cli::cmd_augment(&cfg)?;
            eprint!("{report}");
            let tsv = parallel_to_tsv(&examples);
            match m.get_one::<String>("output") {
                Some(path) => {
                    std::fs::write(path, tsv).map_err(|e| Error::Io {
                        path: PathBuf::from(path),
                        source: e,
                    })?;
                    Ok(String::new())
                }
                None => Ok(tsv),
            }
        }
        "stats" => cli::cmd_stats(&cfg),
        _ => unreachable!("unknown subcommand {name}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(&matches) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
