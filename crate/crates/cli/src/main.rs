use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use skill_select::codec::FlowCodec;
use skill_select::domain::{build_library, fill_descriptor, SkillLabel};
use skill_select::error::{Stage, StageExt};
use skill_select::fusion::run_pipeline;
use skill_select::harness::{
    build_corpus, oracle_best, oracle_seeds, run_experiment, summary_csv, train_codec, ExperimentConfig, MethodReport,
    ORACLE_SEEDS,
};
use skill_select::lang::{rank_templates_llm, ContinuationScorer, NgramBackend, RemoteBackend};
use skill_select::retrieval::{write_retrieval_log, HashEncoder};
use skill_select::sim::{read_corpus, skill_scene, write_corpus, DemoRecord, SceneJitter, SkillKind, EPISODE_STEPS};
use skill_select::{write_atomic, Error, Result};

/// Selects behavior templates for tool-use skills and evaluates the selection methods
/// against a simulator oracle.
#[derive(Debug, Parser)]
#[command(name = "skill-select", version)]
struct Cli {
    /// Experiment configuration (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Offsets every configured seed by this amount.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: the config's output_dir, else ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic demonstration corpus to <out>/corpus.
    GenCorpus,
    /// Train the flow codec and write <out>/codec.vqc and <out>/train_report.json.
    TrainCodec,
    /// Rank every template by simulated progress on one scene variation.
    Oracle(SkillArgs),
    /// Rank every template by language-model score.
    Score {
        #[command(flatten)]
        skill: SkillArgs,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Run the full selection pipeline for one skill.
    Select {
        #[command(flatten)]
        skill: SkillArgs,
        #[command(flatten)]
        llm: LlmArgs,
        #[command(flatten)]
        assets: AssetArgs,
    },
    /// Run every enabled method on every configured skill and write the reports.
    Evaluate {
        #[command(flatten)]
        llm: LlmArgs,
        #[command(flatten)]
        assets: AssetArgs,
    },
    /// Print the summary table of a finished evaluation.
    Report,
}

#[derive(Debug, Args)]
struct SkillArgs {
    /// Skill verb: wipe, scrape, stir or spread, or any verb with --tool and --recipient.
    #[arg(long)]
    skill: String,
    #[arg(long)]
    tool: Option<String>,
    #[arg(long)]
    recipient: Option<String>,
    /// Scene variation index.
    #[arg(long, default_value_t = 0)]
    variation: usize,
}

#[derive(Debug, Args)]
struct LlmArgs {
    /// Score with a remote model instead of the built-in bigram model.
    #[arg(long)]
    endpoint: Option<String>,
    /// Remote request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Debug, Args)]
struct AssetArgs {
    /// Trained codec [default: <out>/codec.vqc, trained and saved when missing].
    #[arg(long)]
    codec: Option<PathBuf>,
    /// Corpus directory [default: <out>/corpus, generated and saved when missing].
    #[arg(long)]
    corpus: Option<PathBuf>,
}

struct Context {
    config: ExperimentConfig,
    out: PathBuf,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => ExperimentConfig::read(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = cli.seed {
            let seeds = &mut config.seeds;
            for v in [
                &mut seeds.corpus,
                &mut seeds.codec_frames,
                &mut seeds.codec_train,
                &mut seeds.scene,
                &mut seeds.execution,
                &mut seeds.oracle,
            ] {
                *v = v.wrapping_add(s);
            }
        }
        let out = cli
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        config.output_dir = Some(out.clone());
        Ok(Self { config, out })
    }

    fn skill(&self, args: &SkillArgs) -> Result<SkillLabel> {
        match (SkillKind::from_verb(&args.skill), &args.tool, &args.recipient) {
            (_, Some(t), Some(r)) => SkillLabel::new(&args.skill, t, r),
            (Some(k), None, None) => Ok(k.label()),
            _ => Err(Error::InvalidSkill(format!(
                "{:?} is not a built-in skill; pass both --tool and --recipient",
                args.skill
            ))),
        }
    }

    fn codec(&self, path: Option<&Path>) -> Result<FlowCodec> {
        if let Some(p) = path {
            return FlowCodec::read(p).stage(Stage::Codec);
        }
        let p = self.out.join("codec.vqc");
        if p.exists() {
            return FlowCodec::read(&p).stage(Stage::Codec);
        }
        self.train_and_save()
    }

    fn train_and_save(&self) -> Result<FlowCodec> {
        eprintln!("training codec on {} frames", self.config.codec.frames);
        let (codec, report) = train_codec(&self.config)?;
        codec.write(&self.out.join("codec.vqc")).stage(Stage::Codec)?;
        let json = serde_json::to_string_pretty(&report)
            .map_err(Error::from)
            .stage(Stage::Codec)?;
        write_atomic(&self.out.join("train_report.json"), json.as_bytes()).stage(Stage::Codec)?;
        eprintln!(
            "reconstruction MSE {:.5} -> {:.5}",
            report.initial_recon, report.final_recon
        );
        Ok(codec)
    }

    fn corpus(&self, path: Option<&Path>) -> Result<Vec<DemoRecord>> {
        if let Some(p) = path {
            return read_corpus(p).stage(Stage::Corpus);
        }
        let dir = self.out.join("corpus");
        if dir.is_dir() {
            return read_corpus(&dir).stage(Stage::Corpus);
        }
        let corpus = build_corpus(&self.config)?;
        write_corpus(&corpus, &dir).stage(Stage::Corpus)?;
        Ok(corpus)
    }
}

fn llm(args: &LlmArgs) -> Box<dyn ContinuationScorer> {
    match &args.endpoint {
        Some(url) => Box::new(RemoteBackend::new(url, Duration::from_secs(args.timeout))),
        None => Box::new(NgramBackend::builtin()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize, stage: Stage) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(Error::from).stage(stage)?;
    write_atomic(path, json.as_bytes()).stage(stage)
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = Context::load(cli).stage(Stage::Config)?;
    match &cli.command {
        Command::GenCorpus => {
            let corpus = build_corpus(&ctx.config)?;
            let dir = ctx.out.join("corpus");
            write_corpus(&corpus, &dir).stage(Stage::Corpus)?;
            println!("wrote {} records to {}", corpus.len(), dir.display());
        }
        Command::TrainCodec => {
            ctx.train_and_save()?;
            println!("wrote {}", ctx.out.join("codec.vqc").display());
        }
        Command::Oracle(args) => {
            let skill = ctx.skill(args).stage(Stage::Config)?;
            let seeds = ctx.config.selection_seeds(args.variation);
            let scene = skill_scene(&skill, SceneJitter::VARIATION, seeds.scene).stage(Stage::Oracle)?;
            let ranking = oracle_best(
                &build_library(),
                &scene,
                &oracle_seeds(seeds.oracle, ORACLE_SEEDS),
                EPISODE_STEPS,
            )
            .stage(Stage::Oracle)?;
            let path = ctx
                .out
                .join("oracle")
                .join(format!("{}_v{}.json", skill.verb, args.variation));
            write_json(&path, &ranking, Stage::Oracle)?;
            println!("rank,id,mean_progress");
            for (rank, &id) in ranking.ranking.iter().enumerate() {
                println!("{},{id},{:.4}", rank + 1, ranking.progress_of(id).unwrap_or(f64::NAN));
            }
        }
        Command::Score { skill, llm: llm_args } => {
            let skill = ctx.skill(skill).stage(Stage::Config)?;
            let library = build_library();
            let scores = rank_templates_llm(llm(llm_args).as_ref(), &skill, &library).stage(Stage::LanguageScore)?;
            write_json(
                &ctx.out.join("scores").join(format!("{}.json", skill.verb)),
                &scores,
                Stage::LanguageScore,
            )?;
            let mut table = String::from("rank\tid\tscore\tdescriptor\n");
            for (rank, id) in scores.ranked_ids().into_iter().enumerate() {
                let descriptor = fill_descriptor(&library[id], &skill).stage(Stage::LanguageScore)?;
                let _ = writeln!(
                    table,
                    "{}\t{id}\t{:.4}\t{descriptor}",
                    rank + 1,
                    scores.get(id).unwrap_or(f64::NAN)
                );
            }
            print!("{table}");
        }
        Command::Select {
            skill: args,
            llm: llm_args,
            assets,
        } => {
            let skill = ctx.skill(args).stage(Stage::Config)?;
            let codec = ctx.codec(assets.codec.as_deref())?;
            let corpus = ctx.corpus(assets.corpus.as_deref())?;
            let output = run_pipeline(
                &skill,
                &build_library(),
                &corpus,
                &codec,
                llm(llm_args).as_ref(),
                &HashEncoder,
                &ctx.config.pipeline(),
                ctx.config.selection_seeds(args.variation),
            )?;
            let stem = format!("{}_v{}", skill.verb, args.variation);
            let dir = ctx.out.join("selections");
            write_atomic(&dir.join(format!("{stem}.json")), output.report.to_json()?.as_bytes())
                .stage(Stage::Report)?;
            write_retrieval_log(
                &dir.join(format!("{stem}_retrieval.jsonl")),
                &skill,
                &output.report.retrieved,
            )
            .stage(Stage::Report)?;
            let r = &output.report;
            println!("candidates {:?}", r.candidates);
            println!(
                "selected {} (llm {}, flow {}, appearance {}; oracle best {})",
                r.selected_id, r.llm_selected_id, r.flow_selected_id, r.appearance_selected_id, r.oracle_id
            );
            for run in &output.runs {
                println!(
                    "  template {:>2}: final progress {:.3}",
                    run.id,
                    run.progress.final_value()
                );
            }
        }
        Command::Evaluate { llm: llm_args, assets } => {
            let codec = ctx.codec(assets.codec.as_deref())?;
            let corpus = ctx.corpus(assets.corpus.as_deref())?;
            let output = run_experiment(&ctx.config, &codec, &corpus, llm(llm_args).as_ref())?;
            print!("{}", summary_csv(&output.report));
        }
        Command::Report => {
            let report = MethodReport::read(&ctx.out.join("method_report.json")).stage(Stage::Report)?;
            print!("{}", summary_csv(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skill-select: error {e}");
            ExitCode::FAILURE
        }
    }
}
