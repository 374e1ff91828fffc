use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{emit_progress_csv, summary_csv, Method, MethodReport, MethodSection, TrialResult};
use crate::codec::{train, CodecDims, FlowCodec, FrameShape, TrainConfig, TrainReport};
use crate::domain::{build_library, SkillLabel};
use crate::error::{Error, Result, Stage, StageExt};
use crate::fsio::write_atomic;
use crate::fusion::{
    run_pipeline, PipelineConfig, PipelineOutput, SelectionReport, SelectionSeeds, DEFAULT_K, DEFAULT_LAMBDA,
};
use crate::lang::ContinuationScorer;
use crate::retrieval::{retrieval_log_lines, HashEncoder, DEFAULT_M};
use crate::sim::{flow_training_frames, synth_demo_corpus, DemoRecord, SkillKind, EPISODE_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodToggles {
    pub llm: bool,
    pub flow: bool,
    pub appearance: bool,
    pub combined: bool,
}

impl MethodToggles {
    pub const ALL: MethodToggles = MethodToggles {
        llm: true,
        flow: true,
        appearance: true,
        combined: true,
    };

    pub fn enabled(&self) -> Vec<Method> {
        Method::ALL
            .into_iter()
            .filter(|m| match m {
                Method::Llm => self.llm,
                Method::Flow => self.flow,
                Method::Appearance => self.appearance,
                Method::Combined => self.combined,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSeeds {
    pub corpus: u64,
    pub codec_frames: u64,
    pub codec_train: u64,
    /// Variation `v` uses `scene + v`, `execution + v` and `oracle + v`.
    pub scene: u64,
    pub execution: u64,
    pub oracle: u64,
}

impl Default for ExperimentSeeds {
    fn default() -> Self {
        Self {
            corpus: 11,
            codec_frames: 1,
            codec_train: 0,
            scene: 100,
            execution: 200,
            oracle: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecSettings {
    pub frames: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub beta: f64,
}

impl Default for CodecSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            frames: 10_000,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch: t.batch,
            beta: t.beta,
        }
    }
}

/// JSON experiment description; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub skills: Vec<SkillLabel>,
    pub methods: MethodToggles,
    pub lambda: f64,
    pub k: usize,
    /// Demonstrations retrieved per skill.
    pub m: usize,
    /// Scene variations per skill.
    pub variations: usize,
    /// Expert (and distractor) demonstrations per skill in the synthetic corpus.
    pub demos_per_skill: usize,
    pub codec: CodecSettings,
    pub seeds: ExperimentSeeds,
    pub success_threshold: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            skills: SkillKind::ALL.iter().map(|k| k.label()).collect(),
            methods: MethodToggles::ALL,
            lambda: DEFAULT_LAMBDA,
            k: DEFAULT_K,
            m: DEFAULT_M,
            variations: 5,
            demos_per_skill: 5,
            codec: CodecSettings::default(),
            seeds: ExperimentSeeds::default(),
            success_threshold: 0.5,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.skills.is_empty() {
            return Err(Error::InvalidConfig("at least one skill is required".into()));
        }
        for s in &self.skills {
            s.validate()?;
        }
        self.pipeline().validate(build_library().len())?;
        if self.variations == 0 || self.demos_per_skill == 0 {
            return Err(Error::InvalidConfig(
                "variations and demos_per_skill must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(Error::InvalidConfig("success_threshold must lie in [0, 1]".into()));
        }
        if self.codec.frames == 0 {
            return Err(Error::InvalidConfig("codec.frames must be positive".into()));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            lambda: self.lambda,
            k: self.k,
            m: self.m,
            steps: EPISODE_STEPS,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.codec.epochs,
            learning_rate: self.codec.learning_rate,
            batch: self.codec.batch,
            beta: self.codec.beta,
            seed: self.seeds.codec_train,
        }
    }

    pub fn selection_seeds(&self, variation: usize) -> SelectionSeeds {
        let v = variation as u64;
        SelectionSeeds {
            scene: self.seeds.scene.wrapping_add(v),
            execution: self.seeds.execution.wrapping_add(v),
            oracle: self.seeds.oracle.wrapping_add(v),
        }
    }
}

/// Generates the codec training frames and trains the flow codec described by `config`.
pub fn train_codec(config: &ExperimentConfig) -> Result<(FlowCodec, TrainReport)> {
    let frames = flow_training_frames(config.codec.frames, config.seeds.codec_frames).stage(Stage::Codec)?;
    train(&frames, FrameShape::FLOW, CodecDims::FLOW, &config.train_config()).stage(Stage::Codec)
}

pub fn build_corpus(config: &ExperimentConfig) -> Result<Vec<DemoRecord>> {
    synth_demo_corpus(&config.skills, config.demos_per_skill, config.seeds.corpus).stage(Stage::Corpus)
}

/// One pipeline run per skill and variation.
#[derive(Debug, Clone)]
pub struct Trial {
    pub variation: usize,
    pub output: PipelineOutput,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MethodReport,
    pub trials: Vec<Trial>,
}

fn selected_by(report: &SelectionReport, method: Method) -> usize {
    match method {
        Method::Llm => report.llm_selected_id,
        Method::Flow => report.flow_selected_id,
        Method::Appearance => report.appearance_selected_id,
        Method::Combined => report.selected_id,
    }
}

fn trial_file_stem(skill: &SkillLabel, variation: usize) -> String {
    format!("{}_v{variation}", skill.verb)
}

/// Runs every enabled method on every skill and variation, compares each selection with the
/// simulator oracle and, when `output_dir` is set, writes reports as trials finish.
pub fn run_experiment<L: ContinuationScorer + ?Sized>(
    config: &ExperimentConfig,
    codec: &FlowCodec,
    corpus: &[DemoRecord],
    llm: &L,
) -> Result<ExperimentOutput> {
    config.validate().stage(Stage::Config)?;
    let library = build_library();
    let methods = config.methods.enabled();
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir.join("selections")).map_err(|e| Error::from(e).at(Stage::Report))?;
        fs::create_dir_all(dir.join("progress")).map_err(|e| Error::from(e).at(Stage::Report))?;
    }
    let mut trials = Vec::new();
    let mut retrieval_log = String::new();
    for skill in &config.skills {
        for variation in 0..config.variations {
            let output = run_pipeline(
                skill,
                &library,
                corpus,
                codec,
                llm,
                &HashEncoder,
                &config.pipeline(),
                config.selection_seeds(variation),
            )?;
            if let Some(dir) = &config.output_dir {
                let stem = trial_file_stem(skill, variation);
                write_atomic(
                    &dir.join("selections").join(format!("{stem}.json")),
                    output.report.to_json().stage(Stage::Report)?.as_bytes(),
                )
                .stage(Stage::Report)?;
                let traces: Vec<(String, &_)> = methods
                    .iter()
                    .map(|&m| {
                        let id = selected_by(&output.report, m);
                        (
                            m.name().to_string(),
                            &output.run(id).expect("selections are candidates").progress,
                        )
                    })
                    .collect();
                emit_progress_csv(&traces, &dir.join("progress").join(format!("{stem}.csv"))).stage(Stage::Report)?;
                retrieval_log.push_str(&retrieval_log_lines(skill, &output.report.retrieved).stage(Stage::Report)?);
            }
            trials.push(Trial { variation, output });
        }
    }

    let sections = methods
        .iter()
        .map(|&method| {
            let results = trials
                .iter()
                .map(|t| {
                    let r = &t.output.report;
                    let id = selected_by(r, method);
                    let final_progress = t
                        .output
                        .run(id)
                        .expect("selections are candidates")
                        .progress
                        .final_value();
                    TrialResult {
                        skill: r.skill.clone(),
                        variation: t.variation,
                        selected_id: id,
                        oracle_rank: t.output.oracle.rank_of(id).expect("oracle ranks every template"),
                        final_progress,
                        success: final_progress >= config.success_threshold,
                    }
                })
                .collect();
            MethodSection::new(method, results)
        })
        .collect();
    let report = MethodReport {
        success_threshold: config.success_threshold,
        methods: sections,
    };
    if let Some(dir) = &config.output_dir {
        write_atomic(
            &dir.join("method_report.json"),
            report.to_json().stage(Stage::Report)?.as_bytes(),
        )
        .stage(Stage::Report)?;
        write_atomic(&dir.join("summary.csv"), summary_csv(&report).as_bytes()).stage(Stage::Report)?;
        write_atomic(&dir.join("retrieval.jsonl"), retrieval_log.as_bytes()).stage(Stage::Report)?;
    }
    Ok(ExperimentOutput { report, trials })
}
