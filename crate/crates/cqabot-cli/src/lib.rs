//! Command-line surface for the cqabot pipeline.
//!
//! Exit codes: 0 on success, 1 on a runtime error (message on stderr),
//! 2 on a usage error.

mod commands;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub use commands::*;

#[derive(Parser)]
#[command(
    name = "cqabot",
    version,
    about = "Train a chatbot from forum question-answer threads and evaluate it by answer ranking",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert forum threads into single-sentence training pairs
    MakePairs(MakePairsArgs),
    /// Learn byte-pair-encoding merges from a pairs file
    LearnBpe(LearnBpeArgs),
    /// Segment text into subword symbols with learned merges
    ApplyBpe(ApplyBpeArgs),
    /// Train the seq2seq model with periodic checkpoint evaluation
    Train(TrainArgs),
    /// Pick the best checkpoint from a records file
    Select(SelectArgs),
    /// Rank each thread's comments against a responder's answer
    Rank(RankArgs),
    /// Mean Average Precision of a responder on a labeled dataset
    EvalMap(EvalMapArgs),
    /// Multi-reference BLEU of a responder on a labeled dataset
    EvalBleu(EvalBleuArgs),
    /// Interactive question-in, answer-out loop on a checkpoint
    Chat(ChatArgs),
}

/// Parses `argv` and runs the named subcommand, returning the process exit
/// code instead of exiting, so tests can drive it in-process.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            // clap routes help to stdout and errors to stderr.
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::MakePairs(args) => commands::make_pairs(&args),
        Command::LearnBpe(args) => commands::learn_bpe_cmd(&args),
        Command::ApplyBpe(args) => commands::apply_bpe_cmd(&args),
        Command::Train(args) => commands::train(&args),
        Command::Select(args) => commands::select(&args),
        Command::Rank(args) => commands::rank(&args),
        Command::EvalMap(args) => commands::eval_map(&args),
        Command::EvalBleu(args) => commands::eval_bleu(&args),
        Command::Chat(args) => commands::chat(&args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}
