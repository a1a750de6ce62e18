//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use dwmgipt_core::metrics::{ThresholdSweep, DEFAULT_MARGIN, DEFAULT_MATCH_RADIUS, DEFAULT_PHI};
use dwmgipt_core::{DetectConfig, PsiMode};

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a file into entries. Blank lines and `#` comments (whole-line or
/// trailing) are skipped; keys and values are trimmed.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, found {raw:?}", i + 1))?;
        let key = key.trim();
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        out.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn parse_value<T: FromStr>(e: &Entry) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    e.value.parse().map_err(|err| {
        anyhow!(
            "line {}: invalid value {:?} for {}: {err}",
            e.line,
            e.value,
            e.key
        )
    })
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!(
            "line {}: {} must be true or false, found {:?}",
            e.line,
            e.key,
            e.value
        ),
    }
}

/// Every tunable of a detection and evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub detect: DetectConfig,
    pub phi: f64,
    pub margin: usize,
    pub match_radius: f64,
    pub roc: ThresholdSweep,
    /// Also write the rescaled prior maps of every frame.
    pub dump_prior: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detect: DetectConfig::default(),
            phi: DEFAULT_PHI,
            margin: DEFAULT_MARGIN,
            match_radius: DEFAULT_MATCH_RADIUS,
            roc: ThresholdSweep::UniqueValues,
            dump_prior: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "patch_h",
    "patch_w",
    "step",
    "lambda_scale",
    "penalty_factor",
    "z1",
    "z2",
    "rho",
    "tolerance",
    "check_target_change",
    "max_iter",
    "psi",
    "epsilon",
    "multiplier_init",
    "normalize",
    "sk_window",
    "sk_elongation_reg",
    "sk_scaling_reg",
    "sk_gamma_exponent",
    "k_sigma",
    "v_min",
    "phi",
    "margin",
    "match_radius",
    "roc_thresholds",
    "dump_prior",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Starts from the defaults and applies every entry. Unknown and
    /// repeated keys are errors; the result is validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for e in parse_entries(text)? {
            if !seen.insert(e.key.clone()) {
                bail!("line {}: duplicate key {}", e.line, e.key);
            }
            cfg.apply(&e)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry) -> Result<()> {
        let d = &mut self.detect;
        match e.key.as_str() {
            "patch_h" => d.patch_h = parse_value(e)?,
            "patch_w" => d.patch_w = parse_value(e)?,
            "step" => d.step = parse_value(e)?,
            "lambda_scale" => d.solver.lambda_scale = parse_value(e)?,
            "penalty_factor" => d.solver.penalty_factor = parse_value(e)?,
            "z1" => d.solver.z1 = parse_value(e)?,
            "z2" => d.solver.z2 = parse_value(e)?,
            "rho" => d.solver.rho = parse_value(e)?,
            "tolerance" => d.solver.tolerance = parse_value(e)?,
            "check_target_change" => d.solver.check_target_change = parse_bool(e)?,
            "max_iter" => d.solver.max_iter = parse_value(e)?,
            "psi" => {
                d.solver.psi = match e.value.as_str() {
                    "mean" => PsiMode::MeanNorm,
                    _ => PsiMode::Fixed(parse_value(e)?),
                }
            }
            "epsilon" => d.solver.epsilon = parse_value(e)?,
            "multiplier_init" => d.solver.multiplier_init = parse_value(e)?,
            "normalize" => d.normalize = parse_bool(e)?,
            "sk_window" => d.steering.window = parse_value(e)?,
            "sk_elongation_reg" => d.steering.elongation_reg = parse_value(e)?,
            "sk_scaling_reg" => d.steering.scaling_reg = parse_value(e)?,
            "sk_gamma_exponent" => d.steering.gamma_exponent = parse_value(e)?,
            "k_sigma" => d.segment.k_sigma = parse_value(e)?,
            "v_min" => d.segment.v_min = parse_value(e)?,
            "phi" => self.phi = parse_value(e)?,
            "margin" => self.margin = parse_value(e)?,
            "match_radius" => self.match_radius = parse_value(e)?,
            "roc_thresholds" => {
                self.roc = match e.value.as_str() {
                    "unique" => ThresholdSweep::UniqueValues,
                    _ => ThresholdSweep::Grid(parse_value(e)?),
                }
            }
            "dump_prior" => self.dump_prior = parse_bool(e)?,
            other => bail!("line {}: unknown key {other}", e.line),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.detect.validate()?;
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            bail!("phi must be a non-negative number");
        }
        if self.margin == 0 {
            bail!("margin must be at least 1");
        }
        if !(self.match_radius > 0.0 && self.match_radius.is_finite()) {
            bail!("match_radius must be positive");
        }
        if matches!(self.roc, ThresholdSweep::Grid(n) if n < 2) {
            bail!("roc_thresholds must be `unique` or at least 2");
        }
        Ok(())
    }

    /// Every key with its effective value; `parse` of the result gives back
    /// an equal config.
    pub fn to_text(&self) -> String {
        let d = &self.detect;
        let s = &d.solver;
        let k = &d.steering;
        let psi = match s.psi {
            PsiMode::MeanNorm => "mean".to_string(),
            PsiMode::Fixed(v) => v.to_string(),
        };
        let roc = match self.roc {
            ThresholdSweep::UniqueValues => "unique".to_string(),
            ThresholdSweep::Grid(n) => n.to_string(),
        };
        let values: [String; 26] = [
            d.patch_h.to_string(),
            d.patch_w.to_string(),
            d.step.to_string(),
            s.lambda_scale.to_string(),
            s.penalty_factor.to_string(),
            s.z1.to_string(),
            s.z2.to_string(),
            s.rho.to_string(),
            s.tolerance.to_string(),
            s.check_target_change.to_string(),
            s.max_iter.to_string(),
            psi,
            s.epsilon.to_string(),
            s.multiplier_init.to_string(),
            d.normalize.to_string(),
            k.window.to_string(),
            k.elongation_reg.to_string(),
            k.scaling_reg.to_string(),
            k.gamma_exponent.to_string(),
            d.segment.k_sigma.to_string(),
            d.segment.v_min.to_string(),
            self.phi.to_string(),
            self.margin.to_string(),
            self.match_radius.to_string(),
            roc,
            self.dump_prior.to_string(),
        ];
        let mut out = format!(
            "# dwmgipt {} effective configuration\n",
            env!("CARGO_PKG_VERSION")
        );
        for (key, value) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}
