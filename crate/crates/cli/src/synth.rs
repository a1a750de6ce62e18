//! `synth`: write generated scenes and their annotations.
//!
//! The scene file uses the same `key = value` syntax as run configs:
//!
//! ```text
//! height = 256
//! width = 256
//! background = cloud        # flat | gradient | cloud | edge
//! level = 60
//! noise_sigma = 0
//! seed = 7
//! frames = 3                # frame i is drawn with seed + i
//! format = p5               # p5 (binary) or p2 (ascii)
//! target = 128, 100, 120, 1.5   # cx, cy, amplitude, sigma; repeatable
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dwmgipt_core::synth::{generate, BackgroundKind, SceneSpec, TargetSpec, RNG_NAME};

use crate::config::{parse_entries, parse_value, Entry};
use crate::csvio::write_annotations;
use crate::io::{encode_pgm, write_atomic, write_text, PgmEncoding};

pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const METADATA_FILE: &str = "synth.txt";

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub spec: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPlan {
    pub scene: SceneSpec,
    pub frames: usize,
    pub encoding: PgmEncoding,
}

impl SynthPlan {
    pub fn parse(text: &str) -> Result<Self> {
        let mut scene = SceneSpec {
            height: 256,
            width: 256,
            background: BackgroundKind::Flat,
            level: 60.0,
            targets: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
        };
        let mut frames = 1;
        let mut encoding = PgmEncoding::Binary;
        for e in parse_entries(text)? {
            match e.key.as_str() {
                "height" => scene.height = parse_value(&e)?,
                "width" => scene.width = parse_value(&e)?,
                "background" => {
                    scene.background = BackgroundKind::from_name(&e.value).with_context(|| {
                        format!("line {}: unknown background {:?}", e.line, e.value)
                    })?
                }
                "level" => scene.level = parse_value(&e)?,
                "noise_sigma" => scene.noise_sigma = parse_value(&e)?,
                "seed" => scene.seed = parse_value(&e)?,
                "frames" => frames = parse_value(&e)?,
                "format" => {
                    encoding = match e.value.as_str() {
                        "p5" => PgmEncoding::Binary,
                        "p2" => PgmEncoding::Ascii,
                        _ => bail!("line {}: format must be p2 or p5", e.line),
                    }
                }
                "target" => scene.targets.push(parse_target(&e)?),
                other => bail!("line {}: unknown key {other}", e.line),
            }
        }
        if frames == 0 {
            bail!("frames must be at least 1");
        }
        scene.validate()?;
        Ok(Self {
            scene,
            frames,
            encoding,
        })
    }

    pub fn frame_name(&self, i: usize) -> String {
        format!("frame_{i:04}")
    }

    fn describe(&self) -> String {
        let s = &self.scene;
        let mut out = format!("# dwmgipt {} synthetic scenes\n", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "rng = {RNG_NAME}");
        let _ = writeln!(out, "height = {}\nwidth = {}", s.height, s.width);
        let _ = writeln!(
            out,
            "background = {}\nlevel = {}",
            s.background.name(),
            s.level
        );
        let _ = writeln!(
            out,
            "noise_sigma = {}\nseed = {}\nframes = {}",
            s.noise_sigma, s.seed, self.frames
        );
        let format = match self.encoding {
            PgmEncoding::Binary => "p5",
            PgmEncoding::Ascii => "p2",
        };
        let _ = writeln!(out, "format = {format}");
        for t in &s.targets {
            let _ = writeln!(
                out,
                "target = {}, {}, {}, {}",
                t.cx, t.cy, t.amplitude, t.sigma
            );
        }
        out
    }
}

fn parse_target(e: &Entry) -> Result<TargetSpec> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    let nums = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .ok()
        .filter(|v| v.len() == 4)
        .with_context(|| format!("line {}: target needs cx, cy, amplitude, sigma", e.line))?;
    Ok(TargetSpec {
        cx: nums[0],
        cy: nums[1],
        amplitude: nums[2],
        sigma: nums[3],
    })
}

/// Generates every frame; returns the written image paths.
pub fn run(opts: &SynthOptions) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(&opts.spec)
        .with_context(|| format!("cannot read {}", opts.spec.display()))?;
    let plan = SynthPlan::parse(&text)
        .with_context(|| format!("invalid scene file {}", opts.spec.display()))?;
    write(&plan, &opts.out)
}

pub fn write(plan: &SynthPlan, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut names = Vec::with_capacity(plan.frames);
    let mut truth = Vec::with_capacity(plan.frames);
    let mut paths = Vec::with_capacity(plan.frames);
    for i in 0..plan.frames {
        let spec = SceneSpec {
            seed: plan.scene.seed.wrapping_add(i as u64),
            ..plan.scene.clone()
        };
        let scene = generate(&spec)?;
        let name = plan.frame_name(i);
        let path = out.join(format!("{name}.pgm"));
        write_atomic(&path, |w| encode_pgm(&scene.image, plan.encoding, w))?;
        names.push(name);
        truth.push(scene.truth);
        paths.push(path);
    }
    write_annotations(
        &out.join(ANNOTATIONS_FILE),
        names
            .iter()
            .map(String::as_str)
            .zip(truth.iter().map(Vec::as_slice)),
    )?;
    write_text(&out.join(METADATA_FILE), &plan.describe())?;
    Ok(paths)
}
