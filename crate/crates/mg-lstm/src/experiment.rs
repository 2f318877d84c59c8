//! The end-to-end experiment: generate data, train one model per noise
//! level, run every diagnostic, and emit the figure-data CSVs — all from
//! one declarative config.
//!
//! The pipeline is a pure function of `(config, global_seed)`. Per-stage
//! seeds are derived by hashing the global seed with the stage name and
//! the noise level, so no two stages ever share a noise stream. Every
//! output directory carries a manifest recording the config hash, the
//! derived seeds, and wall-clock times; stages whose outputs already exist
//! under a matching hash are skipped, and a hash mismatch over existing
//! artifacts aborts with a stale-artifact error.
//!
//! Directory layout under `output_dir`:
//!
//! ```text
//! config.toml                  resolved config echo
//! manifest.json                config hash, per-stage seeds, timings
//! data/mg_clean.csv            full trajectory, t,mu,y
//! data/noisy_<sigma>.csv       training segment with training noise
//! models/sigma_<sigma>.model   trained parameters + scaler
//! models/sigma_<sigma>_train_log.csv
//! results/eval_<sigma>.csv     sequential predictions on fresh noisy data
//! results/nrmse_sweep.csv      train_sigma, eval_sigma, e_mu
//! results/zeroth_order.csv     eval_sigma, e_mu
//! results/alpha_vs_sigma.csv   sigma, alpha, ratio
//! results/impulse_profile_<sigma>.csv
//! results/impulse_summary.csv  sigma, e_0, e_0_over_impulse, lambda
//! results/report.md
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::diagnostics::{
    contribution_alpha, impulse_experiment, noise_sweep, sequential_predict, zeroth_order_nrmse,
    AlphaResult, CaptureOpts, ImpulseConfig, ImpulseResult,
};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::mg::{add_noise, integrate_mg, MgConfig, NoisySeries, Trajectory, SAMPLE_SPACING};
use crate::model::TrainedModel;
use crate::rng::{derive_seed, sigma_tag};
use crate::train::{train_with, TrainConfig, TrainOutcome};

/// Series lengths and evaluation bookkeeping.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Samples in the training segment.
    pub train_len: usize,
    /// Samples in the held-out evaluation segment that follows it.
    pub eval_len: usize,
    /// Initial predictions excluded from evaluation NRMSE while the state
    /// relaxes from zero.
    pub eval_warmup: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_len: 20_000,
            eval_len: 10_000,
            eval_warmup: 100,
        }
    }
}

/// The full experiment description. `Default` is the desk preset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Training noise levels, strictly ascending.
    pub sigmas: Vec<f64>,
    /// Evaluation noise levels for the sweep; defaults to `sigmas`.
    pub eval_sigmas: Option<Vec<f64>>,
    pub global_seed: u64,
    pub output_dir: PathBuf,
    pub mg: MgConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub impulse: ImpulseConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sigmas: CANONICAL_SIGMAS.to_vec(),
            eval_sigmas: None,
            global_seed: 42,
            output_dir: PathBuf::from("runs/desk"),
            mg: MgConfig::default(),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            impulse: ImpulseConfig::default(),
        }
    }
}

/// The seven noise levels of the canonical sweep.
pub const CANONICAL_SIGMAS: [f64; 7] = [0.0, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64];

impl ExperimentConfig {
    /// Desk preset: N = 32, ~2000 ADAM steps per model, minutes of CPU.
    pub fn desk() -> Self {
        ExperimentConfig::default()
    }

    /// Paper-scale preset: N = 128, a 100k-sample training series, hours
    /// of CPU.
    pub fn paper() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("runs/paper"),
            data: DataConfig {
                train_len: 100_000,
                eval_len: 10_000,
                eval_warmup: 100,
            },
            train: TrainConfig {
                n_cells: 128,
                n_epochs: 100,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    /// Total integration time implied by the segment lengths; the `[mg]`
    /// `t_end` field is derived, not read, inside the pipeline.
    fn derived_t_end(&self) -> f64 {
        self.mg.transient + (self.data.train_len + self.data.eval_len - 1) as f64 * SAMPLE_SPACING
    }

    /// Copy with `mg.t_end` pinned to the derived value; this is the form
    /// that is validated, hashed, and echoed.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.mg.t_end = self.derived_t_end();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        let check_levels = |name: &str, levels: &[f64]| -> Result<()> {
            if levels.is_empty() {
                return fail(format!("{name} must not be empty"));
            }
            for pair in levels.windows(2) {
                if !(pair[1] > pair[0]) {
                    return fail(format!("{name} must be strictly ascending: {levels:?}"));
                }
            }
            if levels[0] < 0.0 {
                return fail(format!("{name} must be non-negative: {levels:?}"));
            }
            Ok(())
        };
        check_levels("sigmas", &self.sigmas)?;
        if let Some(levels) = &self.eval_sigmas {
            check_levels("eval_sigmas", levels)?;
        }
        if self.output_dir.as_os_str().is_empty() {
            return fail("output_dir must not be empty".into());
        }
        self.resolved().mg.validate()?;
        self.train.validate()?;

        let min_train = self.train.seq_len * self.train.batch_size + 1;
        if self.data.train_len < min_train {
            return fail(format!(
                "train_len {} cannot fill one batch of {} windows of length {}",
                self.data.train_len, self.train.batch_size, self.train.seq_len
            ));
        }
        if self.impulse.period == 0 || self.impulse.n_ensembles == 0 {
            return fail("impulse period and n_ensembles must be positive".into());
        }
        if !(self.impulse.magnitude > 0.0) {
            return fail(format!(
                "impulse magnitude must be positive, got {}",
                self.impulse.magnitude
            ));
        }
        let min_eval = (self.impulse.n_ensembles + 1) * self.impulse.period + 1;
        if self.data.eval_len < min_eval {
            return fail(format!(
                "eval_len {} is too short for {} impulse windows of {} (+1 warm-up): need {}",
                self.data.eval_len, self.impulse.n_ensembles, self.impulse.period, min_eval
            ));
        }
        if self.data.eval_warmup + 2 > self.data.eval_len {
            return fail(format!(
                "eval_warmup {} leaves no samples in eval_len {}",
                self.data.eval_warmup, self.data.eval_len
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Hash of the resolved config with `output_dir` blanked, so a results
    /// tree stays valid when relocated.
    pub fn hash(&self) -> String {
        let mut canonical = self.resolved();
        canonical.output_dir = PathBuf::new();
        let mut hasher = Sha256::new();
        hasher.update(canonical.to_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn eval_sigma_list(&self) -> Vec<f64> {
        self.eval_sigmas.clone().unwrap_or_else(|| self.sigmas.clone())
    }
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
struct StageRecord {
    seeds: BTreeMap<String, u64>,
    outputs: Vec<String>,
    wall_secs: f64,
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
struct Manifest {
    config_hash: String,
    stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    fn load(path: &Path) -> Result<Option<Manifest>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match serde_json::from_str(&text) {
            Ok(m) => Ok(Some(m)),
            Err(_) => Ok(Some(Manifest {
                config_hash: "unreadable".into(),
                stages: BTreeMap::new(),
            })),
        }
    }

    fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// How a stage unit ended.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitOutcome {
    pub name: String,
    pub skipped: bool,
    pub wall_secs: f64,
}

/// Aggregate of one pipeline invocation.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub units: Vec<UnitOutcome>,
}

impl RunReport {
    pub fn summary_lines(&self) -> Vec<String> {
        self.units
            .iter()
            .map(|u| {
                if u.skipped {
                    format!("{}: skipped (up to date)", u.name)
                } else {
                    format!("{}: done in {:.2}s", u.name, u.wall_secs)
                }
            })
            .collect()
    }
}

fn sigma_label(sigma: f64) -> String {
    format!("{sigma}")
}

/// A parsed `t,mu,y` series file.
pub struct SeriesFile {
    pub comments: BTreeMap<String, String>,
    pub times: Vec<f64>,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
}

impl SeriesFile {
    pub fn read(path: &Path) -> Result<SeriesFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::InvalidConfig(format!("{}: {reason}", path.display()));
        let mut comments = BTreeMap::new();
        let mut times = Vec::new();
        let mut mu = Vec::new();
        let mut y = Vec::new();
        let mut header_seen = false;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    comments.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !header_seen {
                if line.trim() != "t,mu,y" {
                    return Err(bad(format!("expected header t,mu,y, got `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let mut cols = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| bad(format!("missing column {name}")))?
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad {name} in `{line}`")))
            };
            times.push(next("t")?);
            mu.push(next("mu")?);
            y.push(next("y")?);
        }
        if !header_seen || times.is_empty() {
            return Err(bad("no data rows".into()));
        }
        Ok(SeriesFile {
            comments,
            times,
            mu,
            y,
        })
    }

    pub fn comment_f64(&self, key: &str) -> Result<f64> {
        self.comments
            .get(key)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("series file lacks `# {key} = ...`")))
    }

    pub fn to_trajectory(&self) -> Result<Trajectory> {
        Ok(Trajectory {
            times: self.times.clone(),
            values: self.mu.clone(),
            nu: self.comment_f64("nu")?,
        })
    }

    pub fn to_noisy(&self) -> Result<NoisySeries> {
        let sigma = self.comment_f64("sigma")?;
        let seed = self.comment_f64("seed")? as u64;
        Ok(NoisySeries {
            values: self.y.clone(),
            sigma,
            seed,
            clean: self.mu.clone(),
            nu: self.comment_f64("nu")?,
        })
    }
}

/// Compute the contribution ratio for one model file over one series file
/// (the CLI's direct `alpha --model --input` path). Observations are the
/// `y` column.
pub fn alpha_from_files(model_path: &Path, input_path: &Path) -> Result<(f64, AlphaResult)> {
    let model = TrainedModel::load(model_path)?;
    let series = SeriesFile::read(input_path)?;
    let run = sequential_predict(&model, &series.y, &series.mu, CaptureOpts::traces());
    let alpha = contribution_alpha(&run)?;
    Ok((model.train_sigma, alpha))
}

/// The staged experiment over one output directory.
pub struct Pipeline {
    cfg: ExperimentConfig,
    hash: String,
}

impl Pipeline {
    pub fn new(cfg: &ExperimentConfig) -> Result<Pipeline> {
        cfg.validate()?;
        let cfg = cfg.resolved();
        let hash = cfg.hash();
        Ok(Pipeline { cfg, hash })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    fn root(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn data_dir(&self) -> PathBuf {
        self.root().join("data")
    }

    fn models_dir(&self) -> PathBuf {
        self.root().join("models")
    }

    fn results_dir(&self) -> PathBuf {
        self.root().join("results")
    }

    fn manifest_path(&self) -> PathBuf {
        self.root().join("manifest.json")
    }

    fn clean_csv_path(&self) -> PathBuf {
        self.data_dir().join("mg_clean.csv")
    }

    fn noisy_csv_path(&self, sigma: f64) -> PathBuf {
        self.data_dir().join(format!("noisy_{}.csv", sigma_label(sigma)))
    }

    fn model_path(&self, sigma: f64) -> PathBuf {
        self.models_dir().join(format!("sigma_{}.model", sigma_label(sigma)))
    }

    fn train_log_path(&self, sigma: f64) -> PathBuf {
        self.models_dir()
            .join(format!("sigma_{}_train_log.csv", sigma_label(sigma)))
    }

    fn eval_csv_path(&self, sigma: f64) -> PathBuf {
        self.results_dir().join(format!("eval_{}.csv", sigma_label(sigma)))
    }

    fn impulse_profile_path(&self, sigma: f64) -> PathBuf {
        self.results_dir()
            .join(format!("impulse_profile_{}.csv", sigma_label(sigma)))
    }

    /// Validate or initialize the output directory: the manifest hash must
    /// match the config, and artifacts without a manifest are refused.
    fn prepare(&self) -> Result<Manifest> {
        std::fs::create_dir_all(self.root()).map_err(|e| Error::io(self.root(), e))?;
        match Manifest::load(&self.manifest_path())? {
            Some(manifest) => {
                if manifest.config_hash != self.hash {
                    return Err(Error::StaleArtifact {
                        dir: self.root().to_path_buf(),
                        expected: self.hash.clone(),
                        found: manifest.config_hash,
                    });
                }
                Ok(manifest)
            }
            None => {
                for sub in ["data", "models", "results"] {
                    let dir = self.root().join(sub);
                    let occupied = dir
                        .read_dir()
                        .map(|mut it| it.next().is_some())
                        .unwrap_or(false);
                    if occupied {
                        return Err(Error::StaleArtifact {
                            dir: self.root().to_path_buf(),
                            expected: self.hash.clone(),
                            found: "no manifest".into(),
                        });
                    }
                }
                let manifest = Manifest {
                    config_hash: self.hash.clone(),
                    stages: BTreeMap::new(),
                };
                manifest.save(&self.manifest_path())?;
                let echo = self.root().join("config.toml");
                std::fs::write(&echo, self.cfg.to_toml()).map_err(|e| Error::io(&echo, e))?;
                Ok(manifest)
            }
        }
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(self.root())
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned()
    }

    /// Run one resumable unit: skip when the manifest marks it done and
    /// its outputs still exist.
    fn unit<F>(
        &self,
        manifest: &mut Manifest,
        name: &str,
        outputs: &[PathBuf],
        seeds: BTreeMap<String, u64>,
        body: F,
    ) -> Result<UnitOutcome>
    where
        F: FnOnce() -> Result<()>,
    {
        let done = manifest.stages.contains_key(name) && outputs.iter().all(|p| p.exists());
        if done {
            return Ok(UnitOutcome {
                name: name.to_string(),
                skipped: true,
                wall_secs: 0.0,
            });
        }
        let start = Instant::now();
        body()?;
        let wall_secs = start.elapsed().as_secs_f64();
        manifest.stages.insert(
            name.to_string(),
            StageRecord {
                seeds,
                outputs: outputs.iter().map(|p| self.relative(p)).collect(),
                wall_secs,
            },
        );
        manifest.save(&self.manifest_path())?;
        Ok(UnitOutcome {
            name: name.to_string(),
            skipped: false,
            wall_secs,
        })
    }

    fn require(&self, path: &Path, producer: &'static str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::MissingArtifact {
                path: path.to_path_buf(),
                stage: producer,
            })
        }
    }

    fn selected_sigmas(&self, only: Option<f64>) -> Result<Vec<f64>> {
        match only {
            None => Ok(self.cfg.sigmas.clone()),
            Some(sigma) => {
                if self.cfg.sigmas.iter().any(|s| sigma_tag(*s) == sigma_tag(sigma)) {
                    Ok(vec![sigma])
                } else {
                    Err(Error::InvalidConfig(format!(
                        "sigma {sigma} is not in the configured sweep {:?}",
                        self.cfg.sigmas
                    )))
                }
            }
        }
    }

    fn load_trajectory(&self) -> Result<Trajectory> {
        self.require(&self.clean_csv_path(), "generate")?;
        SeriesFile::read(&self.clean_csv_path())?.to_trajectory()
    }

    fn eval_window(&self, traj: &Trajectory) -> Trajectory {
        traj.window(self.cfg.data.train_len, self.cfg.data.eval_len)
    }

    fn load_model(&self, sigma: f64) -> Result<TrainedModel> {
        self.require(&self.model_path(sigma), "train")?;
        TrainedModel::load(&self.model_path(sigma))
    }

    /// Stage: integrate the DDE and write the clean series plus one noisy
    /// training segment per noise level.
    pub fn generate(&self) -> Result<RunReport> {
        let mut manifest = self.prepare()?;
        let dir = self.data_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let mut outputs = vec![self.clean_csv_path()];
        let mut seeds = BTreeMap::new();
        for &sigma in &self.cfg.sigmas {
            outputs.push(self.noisy_csv_path(sigma));
            seeds.insert(
                format!("noise-{}", sigma_label(sigma)),
                derive_seed(self.cfg.global_seed, "generate-noise", sigma_tag(sigma)),
            );
        }

        let cfg = &self.cfg;
        let unit = self.unit(&mut manifest, "generate", &outputs, seeds.clone(), || {
            let traj = integrate_mg(&cfg.mg)?;
            let mut comments = cfg.mg.comment_lines();
            comments.push(format!("train_len = {}", cfg.data.train_len));
            comments.push(format!("eval_len = {}", cfg.data.eval_len));
            write_csv_file(&self.clean_csv_path(), |w| {
                crate::mg::write_series_csv(w, &traj, None, &comments)
            })?;

            let train_window = traj.window(0, cfg.data.train_len);
            for &sigma in &cfg.sigmas {
                let seed = seeds[&format!("noise-{}", sigma_label(sigma))];
                let noisy = add_noise(&train_window, sigma, seed);
                let mut noisy_comments = comments.clone();
                noisy_comments.push(format!("segment = train"));
                noisy_comments.push(format!("sigma = {}", g17(sigma)));
                noisy_comments.push(format!("seed = {seed}"));
                write_csv_file(&self.noisy_csv_path(sigma), |w| {
                    crate::mg::write_series_csv(w, &train_window, Some(&noisy), &noisy_comments)
                })?;
            }
            Ok(())
        })?;
        Ok(RunReport { units: vec![unit] })
    }

    /// Stage: train one model per (selected) noise level.
    pub fn train(&self, only_sigma: Option<f64>) -> Result<RunReport> {
        let mut manifest = self.prepare()?;
        let dir = self.models_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut report = RunReport::default();

        for sigma in self.selected_sigmas(only_sigma)? {
            let label = sigma_label(sigma);
            let unit_name = format!("train/{label}");
            let outputs = [self.model_path(sigma), self.train_log_path(sigma)];
            let train_seed = derive_seed(self.cfg.global_seed, "train", sigma_tag(sigma));
            let seeds = BTreeMap::from([(format!("train-{label}"), train_seed)]);

            let unit = self.unit(&mut manifest, &unit_name, &outputs, seeds, || {
                let noisy_path = self.noisy_csv_path(sigma);
                self.require(&noisy_path, "generate")?;
                let data = SeriesFile::read(&noisy_path)?.to_noisy()?;
                let mut train_cfg = self.cfg.train.clone();
                train_cfg.seed = train_seed;

                let ckpt_dir = self.models_dir().join("checkpoints");
                let outcome: TrainOutcome = train_with(&data, &train_cfg, |step, model| {
                    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
                    model.save(&ckpt_dir.join(format!("sigma_{label}_step_{step}.model")))
                })?;

                outcome.model.save(&self.model_path(sigma))?;
                let mut log = String::from("step,loss,grad_norm\n");
                for row in &outcome.log {
                    let _ = writeln!(log, "{},{},{}", row.step, g17(row.loss), g17(row.grad_norm));
                }
                let log_path = self.train_log_path(sigma);
                std::fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
                Ok(())
            })?;
            report.units.push(unit);
        }
        Ok(report)
    }

    /// Stage: sequential prediction of each model on fresh noisy
    /// observations of the evaluation segment at its own training level.
    pub fn evaluate(&self, only_sigma: Option<f64>) -> Result<RunReport> {
        let mut manifest = self.prepare()?;
        let dir = self.results_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut report = RunReport::default();
        let traj = self.load_trajectory()?;
        let eval = self.eval_window(&traj);

        for sigma in self.selected_sigmas(only_sigma)? {
            let label = sigma_label(sigma);
            let unit_name = format!("evaluate/{label}");
            let outputs = [self.eval_csv_path(sigma)];
            let noise_seed = derive_seed(self.cfg.global_seed, "evaluate-noise", sigma_tag(sigma));
            let seeds = BTreeMap::from([(format!("eval-noise-{label}"), noise_seed)]);

            let unit = self.unit(&mut manifest, &unit_name, &outputs, seeds, || {
                let model = self.load_model(sigma)?;
                let noisy = add_noise(&eval, sigma, noise_seed);
                let run = sequential_predict(&model, &noisy.values, &eval.values, CaptureOpts::none());
                let e_mu = run.nrmse_vs_truth(eval.nu, self.cfg.data.eval_warmup);

                let mut text = String::new();
                let _ = writeln!(text, "# sigma = {}", g17(sigma));
                let _ = writeln!(text, "# seed = {noise_seed}");
                let _ = writeln!(text, "# e_mu = {}", g17(e_mu));
                let _ = writeln!(text, "# eval_warmup = {}", self.cfg.data.eval_warmup);
                let _ = writeln!(text, "t,mu,y,y_hat");
                // preds[i] forecasts sample i+1: align rows on the target.
                for i in 0..run.preds.len() - 1 {
                    let _ = writeln!(
                        text,
                        "{},{},{},{}",
                        g17(eval.times[i + 1]),
                        g17(eval.values[i + 1]),
                        g17(noisy.values[i + 1]),
                        g17(run.preds[i])
                    );
                }
                let path = self.eval_csv_path(sigma);
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
            })?;
            report.units.push(unit);
        }
        Ok(report)
    }

    /// Stage: NRMSE matrix of every model over every evaluation noise
    /// level, plus the zeroth-order baseline.
    pub fn sweep(&self) -> Result<RunReport> {
        let mut manifest = self.prepare()?;
        let dir = self.results_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let outputs = [
            dir.join("nrmse_sweep.csv"),
            dir.join("zeroth_order.csv"),
        ];
        let eval_sigmas = self.cfg.eval_sigma_list();
        let mut seeds = BTreeMap::new();
        for &sigma in &eval_sigmas {
            seeds.insert(
                format!("zeroth-{}", sigma_label(sigma)),
                derive_seed(self.cfg.global_seed, "eval-noise-zeroth", sigma_tag(sigma)),
            );
        }

        let unit = self.unit(&mut manifest, "sweep", &outputs, seeds.clone(), || {
            let traj = self.load_trajectory()?;
            let eval = self.eval_window(&traj);
            let models: Vec<TrainedModel> = self
                .cfg
                .sigmas
                .iter()
                .map(|&s| self.load_model(s))
                .collect::<Result<_>>()?;
            let warmup = self.cfg.data.eval_warmup;

            let cells = noise_sweep(&models, &eval, &eval_sigmas, self.cfg.global_seed, warmup);
            let mut text = String::from("train_sigma,eval_sigma,e_mu\n");
            for cell in &cells {
                let _ = writeln!(
                    text,
                    "{},{},{}",
                    g17(cell.train_sigma),
                    g17(cell.eval_sigma),
                    g17(cell.e_mu)
                );
            }
            std::fs::write(&outputs[0], text).map_err(|e| Error::io(&outputs[0], e))?;

            let mut zeroth = String::from("eval_sigma,e_mu\n");
            for &sigma in &eval_sigmas {
                let seed = seeds[&format!("zeroth-{}", sigma_label(sigma))];
                let e = zeroth_order_nrmse(&eval, sigma, seed, warmup);
                let _ = writeln!(zeroth, "{},{}", g17(sigma), g17(e));
            }
            std::fs::write(&outputs[1], zeroth).map_err(|e| Error::io(&outputs[1], e))
        })?;
        Ok(RunReport { units: vec![unit] })
    }

    /// Stage: contribution ratio of every model on matched noiseless
    /// evaluation inputs.
    pub fn alpha(&self) -> Result<RunReport> {
        let mut manifest = self.prepare()?;
        let dir = self.results_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let outputs = [dir.join("alpha_vs_sigma.csv")];

        let unit = self.unit(&mut manifest, "alpha", &outputs, BTreeMap::new(), || {
            let traj = self.load_trajectory()?;
            let eval = self.eval_window(&traj);
            let mut text = String::from("sigma,alpha,ratio,skipped_terms\n");
            for &sigma in &self.cfg.sigmas {
                let model = self.load_model(sigma)?;
                let run =
                    sequential_predict(&model, &eval.values, &eval.values, CaptureOpts::traces());
                let result = contribution_alpha(&run)?;
                let _ = writeln!(
                    text,
                    "{},{},{},{}",
                    g17(sigma),
                    g17(result.alpha),
                    g17(result.ratio),
                    result.skipped
                );
            }
            std::fs::write(&outputs[0], text).map_err(|e| Error::io(&outputs[0], e))
        })?;
        Ok(RunReport { units: vec![unit] })
    }

    /// Stage: periodic-impulse experiment per model, plus the summary
    /// table once every profile exists.
    pub fn impulse(&self, only_sigma: Option<f64>) -> Result<RunReport> {
        let mut manifest = self.prepare()?;
        let dir = self.results_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut report = RunReport::default();
        let traj = self.load_trajectory()?;
        let eval = self.eval_window(&traj);

        for sigma in self.selected_sigmas(only_sigma)? {
            let label = sigma_label(sigma);
            let unit_name = format!("impulse/{label}");
            let outputs = [self.impulse_profile_path(sigma)];
            let unit = self.unit(&mut manifest, &unit_name, &outputs, BTreeMap::new(), || {
                let model = self.load_model(sigma)?;
                let result = impulse_experiment(&model, &eval, &self.cfg.impulse)?;
                write_impulse_profile(&outputs[0], sigma, &result)
            })?;
            report.units.push(unit);
        }

        // The summary is rebuilt from the profile files once all levels
        // have one.
        if self
            .cfg
            .sigmas
            .iter()
            .all(|&s| self.impulse_profile_path(s).exists())
        {
            let summary_path = dir.join("impulse_summary.csv");
            let outputs = [summary_path.clone()];
            let unit = self.unit(
                &mut manifest,
                "impulse-summary",
                &outputs,
                BTreeMap::new(),
                || {
                    let mut text = String::from("sigma,e_0,e_0_over_impulse,lambda\n");
                    for &sigma in &self.cfg.sigmas {
                        let profile = SeriesFileless::read(&self.impulse_profile_path(sigma))?;
                        let _ = writeln!(
                            text,
                            "{},{},{},{}",
                            g17(sigma),
                            profile.comments["e_0"].clone(),
                            profile.comments["e_0_over_impulse"].clone(),
                            profile.comments["lambda"].clone()
                        );
                    }
                    std::fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))
                },
            )?;
            report.units.push(unit);
        }
        Ok(report)
    }

    /// Stage: concatenate the result tables and the (deterministic part of
    /// the) manifest into one summary document.
    pub fn report(&self) -> Result<RunReport> {
        let mut manifest = self.prepare()?;
        let dir = self.results_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let out_path = dir.join("report.md");
        let outputs = [out_path.clone()];

        let manifest_snapshot = manifest.clone();
        let unit = self.unit(&mut manifest, "report", &outputs, BTreeMap::new(), || {
            let mut doc = String::new();
            let _ = writeln!(doc, "# Experiment report");
            let _ = writeln!(doc);
            let _ = writeln!(doc, "- config hash: `{}`", self.hash);
            let _ = writeln!(doc, "- global seed: {}", self.cfg.global_seed);
            let _ = writeln!(doc, "- noise levels: {:?}", self.cfg.sigmas);
            let _ = writeln!(doc);

            let embed = |doc: &mut String, title: &str, path: &Path| -> Result<()> {
                if !path.exists() {
                    return Ok(());
                }
                let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let _ = writeln!(doc, "## {title}");
                let _ = writeln!(doc);
                let _ = writeln!(doc, "```csv");
                doc.push_str(&body);
                let _ = writeln!(doc, "```");
                let _ = writeln!(doc);
                Ok(())
            };
            embed(&mut doc, "NRMSE sweep", &dir.join("nrmse_sweep.csv"))?;
            embed(&mut doc, "Zeroth-order baseline", &dir.join("zeroth_order.csv"))?;
            embed(&mut doc, "Contribution ratio", &dir.join("alpha_vs_sigma.csv"))?;
            embed(&mut doc, "Impulse summary", &dir.join("impulse_summary.csv"))?;
            for &sigma in &self.cfg.sigmas {
                embed(
                    &mut doc,
                    &format!("Impulse profile, sigma = {}", sigma_label(sigma)),
                    &self.impulse_profile_path(sigma),
                )?;
            }

            let _ = writeln!(doc, "## Sequential prediction files");
            let _ = writeln!(doc);
            for &sigma in &self.cfg.sigmas {
                let path = self.eval_csv_path(sigma);
                if path.exists() {
                    let series = SeriesFileless::read(&path)?;
                    let e_mu = series.comments.get("e_mu").cloned().unwrap_or_default();
                    let _ = writeln!(
                        doc,
                        "- `{}`: e_mu = {e_mu}",
                        self.relative(&path)
                    );
                }
            }
            let _ = writeln!(doc);

            let _ = writeln!(doc, "## Manifest (seeds and outputs)");
            let _ = writeln!(doc);
            let _ = writeln!(doc, "```json");
            #[derive(serde::Serialize)]
            struct StableStage<'a> {
                seeds: &'a BTreeMap<String, u64>,
                outputs: &'a [String],
            }
            // The report must not embed its own stage record or reruns
            // would not be byte-stable.
            let stable: BTreeMap<&String, StableStage> = manifest_snapshot
                .stages
                .iter()
                .filter(|(k, _)| k.as_str() != "report")
                .map(|(k, v)| {
                    (
                        k,
                        StableStage {
                            seeds: &v.seeds,
                            outputs: &v.outputs,
                        },
                    )
                })
                .collect();
            let _ = writeln!(
                doc,
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "config_hash": self.hash,
                    "stages": serde_json::to_value(&stable).expect("stable stages"),
                }))
                .expect("manifest json")
            );
            let _ = writeln!(doc, "```");
            std::fs::write(&out_path, doc).map_err(|e| Error::io(&out_path, e))
        })?;
        Ok(RunReport { units: vec![unit] })
    }

    /// All stages in order.
    pub fn run_all(&self) -> Result<RunReport> {
        let mut report = RunReport::default();
        report.units.extend(self.generate()?.units);
        report.units.extend(self.train(None)?.units);
        report.units.extend(self.evaluate(None)?.units);
        report.units.extend(self.sweep()?.units);
        report.units.extend(self.alpha()?.units);
        report.units.extend(self.impulse(None)?.units);
        report.units.extend(self.report()?.units);
        Ok(report)
    }
}

/// Run the whole experiment for a config; the [`RunReport`] lists each
/// unit with its timing or skip status.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport> {
    Pipeline::new(cfg)?.run_all()
}

fn write_csv_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    body(&mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn write_impulse_profile(path: &Path, sigma: f64, result: &ImpulseResult) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "# sigma = {}", g17(sigma));
    let _ = writeln!(text, "# e_0 = {}", g17(result.e_0));
    let _ = writeln!(text, "# e_0_over_impulse = {}", g17(result.e_0_impulse_units));
    let _ = writeln!(text, "# e_mu = {}", g17(result.e_mu_baseline));
    let _ = writeln!(text, "# lambda = {}", g17(result.lambda));
    let _ = writeln!(text, "# n_ensembles = {}", result.n_ensembles);
    let _ = writeln!(text, "n,e_n");
    for (n, e) in result.e_n.iter().enumerate() {
        let _ = writeln!(text, "{n},{}", g17(*e));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Comment-header reader for result CSVs whose column layout is not
/// `t,mu,y`.
struct SeriesFileless {
    comments: BTreeMap<String, String>,
}

impl SeriesFileless {
    fn read(path: &Path) -> Result<SeriesFileless> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut comments = BTreeMap::new();
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            if let Some((k, v)) = rest.split_once('=') {
                comments.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(SeriesFileless { comments })
    }
}
