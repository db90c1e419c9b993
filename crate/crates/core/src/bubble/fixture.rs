//! Fixture files: a named generator plus the parameters of each check.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use super::blowup::BlowupSeq;
use super::checks::{
    area_identity_check, neck_area_profile, three_circle_check, AreaIdentityReport,
    HypothesisThresholds, NeckProfile, ThreeCircleReport,
};
use super::family::{SignClass, SyntheticFamily};
use crate::error::{invalid, CmlError, Result};
use crate::point::Point;

fn half() -> f64 {
    0.5
}

/// r_k = radius0 · ratio^{−k} around a fixed center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleSpec {
    #[serde(default)]
    pub center: Point,
    pub radius0: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeCircleSpec {
    pub kappa: f64,
    pub length: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "one_u32")]
    pub k: u32,
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeckSpec {
    pub r_in: f64,
    pub r_out: f64,
    #[serde(default = "one_u32")]
    pub k: u32,
    #[serde(default)]
    pub center: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub family: SyntheticFamily,
    /// Inclusive range of family indices k.
    pub ks: [u32; 2],
    #[serde(default = "half")]
    pub window: f64,
    #[serde(default)]
    pub bubbles: Vec<BubbleSpec>,
    pub three_circle: Option<ThreeCircleSpec>,
    pub neck: Option<NeckSpec>,
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self> {
        let fx: Fixture = toml::from_str(text).map_err(|e| invalid(format!("fixture: {e}")))?;
        SyntheticFamily::new(fx.family.generator.clone())?;
        if fx.ks[0] > fx.ks[1] {
            return Err(invalid("fixture ks range is reversed"));
        }
        Ok(fx)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Fixture::parse(&text).map_err(|e| match e {
            CmlError::InvalidInput(m) => invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn indices(&self) -> Vec<u32> {
        (self.ks[0]..=self.ks[1]).collect()
    }

    pub fn blowup_sequences(&self) -> Result<Vec<BlowupSeq>> {
        let idx: Vec<u64> = self.indices().into_iter().map(u64::from).collect();
        self.bubbles
            .iter()
            .map(|b| {
                BlowupSeq::from_fn(&idx, |k| (b.center, b.radius0 * b.ratio.powi(-(k as i32))))
            })
            .collect()
    }
}

/// Outcome of every check a fixture configures.
#[derive(Debug, Clone, Serialize)]
pub struct FixtureRow {
    pub name: String,
    pub sign_class: SignClass,
    pub area_identity: AreaIdentityReport,
    pub three_circle: Option<ThreeCircleReport>,
    pub neck: Option<NeckProfile>,
    /// Any check ran outside its hypotheses.
    pub hypothesis_violation: bool,
}

impl Fixture {
    pub fn evaluate(&self, th: HypothesisThresholds) -> Result<FixtureRow> {
        let area_identity = area_identity_check(
            &self.family,
            &self.blowup_sequences()?,
            self.window,
            &self.indices(),
            th,
        )?;
        let three_circle = self
            .three_circle
            .as_ref()
            .map(|tc| three_circle_check(&self.family, tc.k, tc.kappa, tc.length, tc.offset))
            .transpose()?;
        let neck = self
            .neck
            .as_ref()
            .map(|nk| neck_area_profile(&self.family.member(nk.k)?, nk.center, nk.r_in, nk.r_out))
            .transpose()?;
        let hypothesis_violation = area_identity.hypothesis_violation
            || three_circle
                .as_ref()
                .is_some_and(|t| t.hypothesis_violated());
        Ok(FixtureRow {
            name: self.name.clone(),
            sign_class: self.family.sign_class(),
            area_identity,
            three_circle,
            neck,
            hypothesis_violation,
        })
    }
}

/// Evaluates fixtures on the worker pool, keeping input order.
pub fn evaluate_corpus(fixtures: &[Fixture], th: HypothesisThresholds) -> Vec<Result<FixtureRow>> {
    crate::parallel::install(|| fixtures.par_iter().map(|f| f.evaluate(th)).collect())
}

/// Every `*.toml` fixture in `dir`, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Fixture>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Fixture::load(p)).collect()
}
