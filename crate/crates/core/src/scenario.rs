//! JSON scenario format: system, noise zones, regions, propositions,
//! formula, initial belief, and simplified-model settings.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{
    dlqr, Belief, BoxBounds, DynamicsError, LinearGaussianSystem, MeasurementNoise,
    MeasurementZone,
};
use crate::geometry::{check_psd, GeometryError, Halfspace, Polytope};
use crate::guide::{GuideError, SimbaKind, SimplifiedModel};
use crate::ltlf::{parse_formula, Alphabet, AtomicProp, Ltlf, ParseError, PropTable, MAX_PROPS};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("formula: {0}")]
    Formula(#[from] ParseError),
    #[error("simba: {0}")]
    Guide(#[from] GuideError),
}

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: SystemSpec,
    pub measurement: MeasurementSpec,
    pub regions: Vec<RegionSpec>,
    pub propositions: Vec<AtomicProp>,
    pub formula: String,
    pub initial: InitialSpec,
    pub simba: SimbaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dt: f64,
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "C")]
    pub c: Matrix,
    #[serde(rename = "D")]
    pub d: Matrix,
    #[serde(rename = "Q")]
    pub q: Matrix,
    pub gain: GainSpec,
    pub input_bounds: BoundsSpec,
    pub state_bounds: BoundsSpec,
    /// State indices that regions and zones are expressed in.
    pub workspace: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum GainSpec {
    #[serde(rename = "K")]
    Matrix(Matrix),
    #[serde(rename = "lqr")]
    Lqr {
        #[serde(rename = "Q")]
        q: Matrix,
        #[serde(rename = "R")]
        r: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    /// Checked in order; the first zone containing the state wins.
    #[serde(default)]
    pub zones: Vec<ZoneSpec>,
    pub default: NoiseSpec,
}

/// A measurement covariance, or the string `"none"` for no measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Cov(Matrix),
    Flag(NoMeasurement),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoMeasurement {
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<HalfspaceSpec>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundsSpec>,
    #[serde(rename = "R")]
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    /// Exactly one of `vertices`, `halfspaces`, `box` must be present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<HalfspaceSpec>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundsSpec>,
}

/// Borrowed view of the shape fields shared by regions and zones.
struct Shape<'a> {
    vertices: &'a Option<Vec<[f64; 2]>>,
    halfspaces: &'a Option<Vec<HalfspaceSpec>>,
    bbox: &'a Option<BoundsSpec>,
}

impl RegionSpec {
    fn shape(&self) -> Shape<'_> {
        Shape {
            vertices: &self.vertices,
            halfspaces: &self.halfspaces,
            bbox: &self.bbox,
        }
    }
}

impl RegionSpec {
    /// Dimension implied by the shape fields.
    pub fn dim(&self) -> Option<usize> {
        if self.vertices.is_some() {
            Some(2)
        } else if let Some(hs) = &self.halfspaces {
            hs.first().map(|h| h.a.len())
        } else {
            self.bbox.as_ref().map(|b| b.lo.len())
        }
    }

    pub fn polytope(&self, dim: usize) -> Result<Polytope, ScenarioError> {
        shape(&self.name, dim, self.shape())
    }
}

/// Propositions with optional regions, on their own. Unknown fields are
/// ignored so a full scenario file also parses as one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropsFile {
    pub propositions: Vec<AtomicProp>,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
}

impl ZoneSpec {
    fn shape(&self) -> Shape<'_> {
        Shape {
            vertices: &self.vertices,
            halfspaces: &self.halfspaces,
            bbox: &self.bbox,
        }
    }
}

/// `a · x <= b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimbaSpec {
    pub projection: Vec<usize>,
    pub v_max: f64,
    pub lift: Vec<f64>,
    pub kind: SimbaKind,
    /// Set when lower covariance never lowers satisfaction probability for
    /// this scenario's propositions, which makes the SBA guide admissible.
    #[serde(default)]
    pub admissible: bool,
}

/// A loaded and cross-checked scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub system: LinearGaussianSystem,
    pub regions: Vec<Polytope>,
    pub props: PropTable,
    pub formula: Ltlf,
    pub initial: Belief,
    pub simba: SimplifiedModel,
    pub warnings: Vec<String>,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses scenario JSON, reporting schema errors with a JSON pointer.
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Schema {
        pointer: pointer(e.path()),
        message: e.inner().to_string(),
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file = parse_scenario_file(&text)?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Scenario::from_file(file, &fallback)
}

fn matrix(what: &str, rows: &Matrix) -> Result<DMatrix<f64>, ScenarioError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(ScenarioError::Invalid(format!("{what}: rows have different lengths")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ScenarioError::Invalid(format!("{what}: entries must be finite")));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

fn shape(name: &str, dim: usize, def: Shape<'_>) -> Result<Polytope, ScenarioError> {
    let given = [def.vertices.is_some(), def.halfspaces.is_some(), def.bbox.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(ScenarioError::Invalid(format!(
            "region `{name}` needs exactly one of `vertices`, `halfspaces`, `box`"
        )));
    }
    let poly = if let Some(v) = &def.vertices {
        if dim != 2 {
            return Err(ScenarioError::Invalid(format!(
                "region `{name}`: `vertices` is only supported for a 2-D workspace"
            )));
        }
        Polytope::from_vertices_2d(name, v)?
    } else if let Some(hs) = &def.halfspaces {
        let rows = hs
            .iter()
            .map(|h| Halfspace::new(&h.a, h.b))
            .collect::<Result<Vec<_>, _>>()?;
        Polytope::from_halfspaces(name, dim, rows)?
    } else {
        let b = def.bbox.as_ref().unwrap();
        Polytope::from_box(name, &b.lo, &b.hi)?
    };
    if poly.dim() != dim {
        return Err(GeometryError::Dimension {
            region: name.to_string(),
            expected: dim,
        }
        .into());
    }
    Ok(poly)
}

fn noise(what: &str, def: &NoiseSpec) -> Result<MeasurementNoise, ScenarioError> {
    Ok(match def {
        NoiseSpec::Cov(m) => MeasurementNoise::Cov(matrix(what, m)?),
        NoiseSpec::Flag(NoMeasurement::None) => MeasurementNoise::Unavailable,
    })
}

fn bounds(what: &str, def: &BoundsSpec) -> Result<BoxBounds, ScenarioError> {
    if def.lo.len() != def.hi.len() || def.lo.iter().zip(&def.hi).any(|(l, h)| l > h) {
        return Err(ScenarioError::Invalid(format!("{what}: need lo <= hi of equal length")));
    }
    Ok(BoxBounds::new(def.lo.clone(), def.hi.clone()))
}

impl Scenario {
    /// Validates a parsed file. `fallback_name` is used when the file has no
    /// `name`.
    pub fn from_file(file: ScenarioFile, fallback_name: &str) -> Result<Self, ScenarioError> {
        let s = &file.system;
        let a = matrix("A", &s.a)?;
        let b = matrix("B", &s.b)?;
        let c = matrix("C", &s.c)?;
        let d = matrix("D", &s.d)?;
        let q = matrix("Q", &s.q)?;
        if !a.is_square() || b.nrows() != a.nrows() {
            return Err(DynamicsError::Dimension("A must be square and B must match it".into()).into());
        }
        let gain = match &s.gain {
            GainSpec::Matrix(k) => matrix("K", k)?,
            GainSpec::Lqr { q: wq, r: wr } => {
                let wq = matrix("lqr.Q", wq)?;
                let wr = matrix("lqr.R", wr)?;
                if wq.shape() != a.shape() || wr.shape() != (b.ncols(), b.ncols()) {
                    return Err(DynamicsError::Dimension("LQR weights do not match A, B".into()).into());
                }
                dlqr(&a, &b, &wq, &wr)?
            }
        };
        let dim = s.workspace.len();
        let mut zones = Vec::new();
        for (i, z) in file.measurement.zones.iter().enumerate() {
            let name = z.name.clone().unwrap_or_else(|| format!("zone{i}"));
            zones.push(MeasurementZone {
                region: shape(&name, dim, z.shape())?,
                noise: noise(&format!("zone `{name}` R"), &z.noise)?,
            });
        }
        let system = LinearGaussianSystem {
            a,
            b,
            c,
            d,
            process_noise: q,
            zones,
            default_noise: noise("default R", &file.measurement.default)?,
            gain,
            input_bounds: bounds("input_bounds", &s.input_bounds)?,
            state_bounds: bounds("state_bounds", &s.state_bounds)?,
            dt: s.dt,
            workspace: s.workspace.clone(),
        };
        system.validate()?;

        let mut regions = Vec::new();
        for r in &file.regions {
            if regions.iter().any(|p: &Polytope| p.name() == r.name) {
                return Err(ScenarioError::Invalid(format!("duplicate region `{}`", r.name)));
            }
            regions.push(shape(&r.name, dim, r.shape())?);
        }

        for (i, p) in file.propositions.iter().enumerate() {
            if file.propositions[..i].iter().any(|o| o.name == p.name) {
                return Err(ScenarioError::Invalid(format!("duplicate proposition `{}`", p.name)));
            }
            if !(p.alpha > 0.0 && p.alpha < 1.0) {
                return Err(ScenarioError::Invalid(format!(
                    "proposition `{}`: alpha must lie in (0, 1)",
                    p.name
                )));
            }
            if !regions.iter().any(|r| r.name() == p.region) {
                return Err(GeometryError::UnresolvedRegion {
                    prop: p.name.clone(),
                    region: p.region.clone(),
                }
                .into());
            }
        }
        let props = PropTable::new(file.propositions.clone());
        let formula = parse_formula(&file.formula, &props)?;
        if Alphabet::of(&formula).len() > MAX_PROPS {
            return Err(ScenarioError::Invalid(format!(
                "formula uses more than {MAX_PROPS} propositions"
            )));
        }

        let n = system.state_dim();
        let mean = DVector::from_column_slice(&file.initial.mean);
        let cov = matrix("initial.cov", &file.initial.cov)?;
        if mean.len() != n || cov.shape() != (n, n) {
            return Err(DynamicsError::Dimension("initial belief must match the state".into()).into());
        }
        check_psd(&cov)?;
        if !system.state_bounds.contains(&mean, crate::belief::BOUNDS_TOL) {
            return Err(DynamicsError::BoundaryViolation.into());
        }
        let initial = Belief::initial(mean, cov);

        let simba = SimplifiedModel {
            projection: file.simba.projection.clone(),
            kind: file.simba.kind,
            v_max: file.simba.v_max,
            lift: file.simba.lift.clone(),
        };
        simba.validate(&system)?;

        let mut warnings = Vec::new();
        let step = system.max_step_displacement();
        if let Some(smallest) = regions.iter().min_by(|x, y| x.inradius().total_cmp(&y.inradius())) {
            if step > 0.5 * smallest.inradius() {
                warnings.push(format!(
                    "per-step displacement bound {step:.3} exceeds half the inradius of region `{}` ({:.3}); labels are only checked at discrete steps",
                    smallest.name(),
                    smallest.inradius()
                ));
            }
        }
        let guide_step = simba.v_max * system.dt;
        if let Some(smallest) = regions.iter().min_by(|x, y| x.inradius().total_cmp(&y.inradius())) {
            if guide_step > 0.5 * smallest.inradius() {
                warnings.push(format!(
                    "guide step {guide_step:.3} exceeds half the inradius of region `{}`",
                    smallest.name()
                ));
            }
        }
        if simba.kind == SimbaKind::Sba && !file.simba.admissible {
            warnings.push("SBA guide requested without `admissible: true`; guides may mislead the search".into());
        }

        Ok(Self {
            name: file.name.clone().unwrap_or_else(|| fallback_name.to_string()),
            file,
            system,
            regions,
            props,
            formula,
            initial,
            simba,
            warnings,
        })
    }

    /// Same scenario with a different formula over the same propositions.
    pub fn with_formula(&self, text: &str) -> Result<Self, ScenarioError> {
        let mut file = self.file.clone();
        file.formula = text.to_string();
        Self::from_file(file, &self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TOY: &str = r#"{
        "system": {
            "dt": 1.0,
            "A": [[1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "Q": [[0.0001]],
            "gain": {"K": [[0.5]]},
            "input_bounds": {"lo": [-0.5], "hi": [0.5]},
            "state_bounds": {"lo": [0.0], "hi": [10.0]},
            "workspace": [0]
        },
        "measurement": {"zones": [{"box": {"lo": [0.0], "hi": [2.0]}, "R": "none"}], "default": [[0.001]]},
        "regions": [{"name": "A", "box": {"lo": [7.0], "hi": [9.0]}}],
        "propositions": [{"name": "a", "region": "A", "alpha": 0.05, "polarity": "reach"}],
        "formula": "F a",
        "initial": {"mean": [1.0], "cov": [[0.0001]]},
        "simba": {"projection": [0], "v_max": 0.5, "lift": [0.0], "kind": "sba", "admissible": true}
    }"#;

    #[test]
    fn toy_loads_cleanly() {
        let s = Scenario::from_file(parse_scenario_file(TOY).unwrap(), "toy").unwrap();
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);
        assert_eq!(s.system.zones.len(), 1);
        assert_eq!(s.system.zones[0].noise, MeasurementNoise::Unavailable);
    }

    #[test]
    fn schema_errors_carry_a_pointer() {
        let bad = TOY.replace("\"alpha\": 0.05", "\"alpha\": \"high\"");
        match parse_scenario_file(&bad) {
            Err(ScenarioError::Schema { pointer, .. }) => {
                assert_eq!(pointer, "/propositions/0/alpha")
            }
            other => panic!("{other:?}"),
        }
        let extra = TOY.replace("\"formula\"", "\"bogus\": 1, \"formula\"");
        assert!(matches!(
            parse_scenario_file(&extra),
            Err(ScenarioError::Schema { .. })
        ));
    }

    #[test]
    fn unstable_gain_is_rejected() {
        let bad = TOY.replace("{\"K\": [[0.5]]}", "{\"K\": [[-0.2]]}");
        let err = Scenario::from_file(parse_scenario_file(&bad).unwrap(), "toy").unwrap_err();
        match err {
            ScenarioError::Dynamics(DynamicsError::UnstableGain { radius }) => {
                assert!((radius - 1.2).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_region_is_rejected() {
        let bad = TOY.replace("\"region\": \"A\"", "\"region\": \"Z\"");
        let err = Scenario::from_file(parse_scenario_file(&bad).unwrap(), "toy").unwrap_err();
        assert!(matches!(
            err,
            ScenarioError::Geometry(GeometryError::UnresolvedRegion { .. })
        ));
    }

    #[test]
    fn coarse_steps_warn() {
        let coarse = TOY.replace("\"hi\": [9.0]", "\"hi\": [7.5]");
        let s = Scenario::from_file(parse_scenario_file(&coarse).unwrap(), "toy").unwrap();
        assert_eq!(s.warnings.len(), 2);
    }

    #[test]
    fn lqr_gain() {
        let lqr = TOY.replace(
            "{\"K\": [[0.5]]}",
            "{\"lqr\": {\"Q\": [[1.0]], \"R\": [[1.0]]}}",
        );
        let s = Scenario::from_file(parse_scenario_file(&lqr).unwrap(), "toy").unwrap();
        let p = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((s.system.gain[(0, 0)] - p / (1.0 + p)).abs() < 1e-10);
    }
}
