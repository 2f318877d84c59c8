//! Trained-model persistence.
//!
//! A model is a single text document: a handful of `key value` header
//! lines, then every parameter array as `array <name> <rows> <cols>`
//! followed by `rows` lines of `cols` row-major values, closed by `end`.
//! Values are written with 17 significant digits, so a save/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::lstm::{param_shape, CandidateKind, LstmParams, LstmState};
use crate::mg::Scaler;

const FORMAT_TAG: &str = "mg-lstm-model";
const FORMAT_VERSION: &str = "v1";

/// A trained network plus everything needed to run it on raw data: the
/// normalizer fitted on its training series, the training noise level, the
/// training seed, and the signal scale nu of the generating run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: LstmParams,
    pub scaler: Scaler,
    pub train_sigma: f64,
    pub seed: u64,
    pub nu: f64,
}

impl TrainedModel {
    pub fn init_state(&self) -> LstmState {
        LstmState::zeros(self.params.n_cells)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG} {FORMAT_VERSION}");
        let _ = writeln!(out, "n_cells {}", self.params.n_cells);
        let _ = writeln!(out, "candidate {}", self.params.candidate.name());
        let _ = writeln!(out, "train_sigma {}", g17(self.train_sigma));
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "scaler_min {}", g17(self.scaler.min));
        let _ = writeln!(out, "scaler_max {}", g17(self.scaler.max));
        let _ = writeln!(out, "nu {}", g17(self.nu));
        for (name, values) in self.params.arrays() {
            let (rows, cols) = param_shape(name, self.params.n_cells);
            let _ = writeln!(out, "array {name} {rows} {cols}");
            for row in values.chunks(cols.max(1)) {
                let line: Vec<String> = row.iter().map(|v| g17(*v)).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        let _ = writeln!(out, "end");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::ModelFormat {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        if header.trim() != format!("{FORMAT_TAG} {FORMAT_VERSION}") {
            return Err(bad(format!("unrecognized header `{header}`")));
        }

        let mut n_cells = None;
        let mut candidate = CandidateKind::default();
        let mut train_sigma = None;
        let mut seed = None;
        let mut scaler_min = None;
        let mut scaler_max = None;
        let mut nu = None;

        // Header section: `key value` until the first `array`.
        let mut pending: Option<String> = None;
        for line in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with("array ") {
                pending = Some(line.to_string());
                break;
            }
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
            let parse_f = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("bad float `{v}` for {key}")))
            };
            match key {
                "n_cells" => {
                    n_cells = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| bad(format!("bad n_cells `{value}`")))?,
                    )
                }
                "candidate" => {
                    candidate = CandidateKind::from_name(value)
                        .ok_or_else(|| bad(format!("unknown candidate `{value}`")))?
                }
                "train_sigma" => train_sigma = Some(parse_f(value)?),
                "seed" => {
                    seed = Some(
                        value
                            .parse::<u64>()
                            .map_err(|_| bad(format!("bad seed `{value}`")))?,
                    )
                }
                "scaler_min" => scaler_min = Some(parse_f(value)?),
                "scaler_max" => scaler_max = Some(parse_f(value)?),
                "nu" => nu = Some(parse_f(value)?),
                other => return Err(bad(format!("unknown header key `{other}`"))),
            }
        }

        let n = n_cells.ok_or_else(|| bad("missing n_cells".into()))?;
        let mut params = LstmParams::zeros(n);
        params.candidate = candidate;

        let mut next_decl = pending;
        loop {
            let decl = match next_decl.take() {
                Some(d) => d,
                None => match lines.next() {
                    Some(l) if l.trim() == "end" => break,
                    Some(l) if l.trim().is_empty() => continue,
                    Some(l) => l.trim().to_string(),
                    None => return Err(bad("missing `end`".into())),
                },
            };
            if decl == "end" {
                break;
            }
            let parts: Vec<&str> = decl.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "array" {
                return Err(bad(format!("expected array declaration, got `{decl}`")));
            }
            let name = parts[1];
            let rows: usize = parts[2]
                .parse()
                .map_err(|_| bad(format!("bad rows in `{decl}`")))?;
            let cols: usize = parts[3]
                .parse()
                .map_err(|_| bad(format!("bad cols in `{decl}`")))?;
            let expect = param_shape(name, n);
            if (rows, cols) != expect {
                return Err(bad(format!(
                    "array {name}: shape {rows}x{cols}, expected {}x{}",
                    expect.0, expect.1
                )));
            }
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| bad(format!("array {name}: truncated")))?;
                for tok in line.split_whitespace() {
                    values.push(
                        tok.parse::<f64>()
                            .map_err(|_| bad(format!("array {name}: bad value `{tok}`")))?,
                    );
                }
            }
            if values.len() != rows * cols {
                return Err(bad(format!(
                    "array {name}: {} values, expected {}",
                    values.len(),
                    rows * cols
                )));
            }
            let slot = params
                .arrays_mut()
                .into_iter()
                .find(|(arr_name, _)| *arr_name == name)
                .ok_or_else(|| bad(format!("unknown array `{name}`")))?
                .1;
            slot.copy_from_slice(&values);
        }

        params.validate()?;
        let model = TrainedModel {
            params,
            scaler: Scaler {
                min: scaler_min.ok_or_else(|| bad("missing scaler_min".into()))?,
                max: scaler_max.ok_or_else(|| bad("missing scaler_max".into()))?,
            },
            train_sigma: train_sigma.ok_or_else(|| bad("missing train_sigma".into()))?,
            seed: seed.ok_or_else(|| bad("missing seed".into()))?,
            nu: nu.ok_or_else(|| bad("missing nu".into()))?,
        };
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}
