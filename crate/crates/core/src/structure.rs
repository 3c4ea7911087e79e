//! Layered structures and the TOML structure-file format.
//!
//! ```toml
//! left = "B"
//! right = "B"
//!
//! [parameters]
//! hbar2_over_2 = 1.0
//!
//! [materials.A]
//! kind = "quantum"
//! mass = 1.0
//! potential = 0.0
//!
//! [materials.B]
//! kind = "quantum"
//! mass = 1.0
//! potential = 10.0
//!
//! [[layers]]
//! material = "A"
//! thickness = 2.0
//! ```
//!
//! `kind = "msl"` materials give `b`, `p`, `y`, `w` as N×N arrays of `[re, im]`
//! pairs (`p`, `y` default to zero); `kind = "sh_piezo"` gives `rho`, `c44`,
//! `e15`, `eps11`.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{MslError, Result};
use crate::linalg::{c, CMat, CVec};
use crate::medium::{make_quantum_medium, make_sh_piezo_medium, MslCoefficients, ShPiezoParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub medium: MslCoefficients,
    pub thickness: f64,
    pub label: Option<String>,
}

impl Layer {
    pub fn new(medium: MslCoefficients, thickness: f64) -> Result<Self> {
        if !thickness.is_finite() || thickness < 0.0 {
            return Err(MslError::InvalidInput(format!("negative or non-finite thickness {thickness}")));
        }
        Ok(Self {
            medium,
            thickness,
            label: None,
        })
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Left half-space, finite layers, right half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredStructure {
    pub left: MslCoefficients,
    pub layers: Vec<Layer>,
    pub right: MslCoefficients,
}

impl LayeredStructure {
    pub fn new(left: MslCoefficients, layers: Vec<Layer>, right: MslCoefficients) -> Result<Self> {
        let n = left.n();
        if right.n() != n {
            return Err(MslError::Dimension(format!("right half-space has N = {}, left has N = {n}", right.n())));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.medium.n() != n {
                return Err(MslError::Dimension(format!("layer {i} has N = {}, expected {n}", layer.medium.n())));
            }
            if !layer.thickness.is_finite() || layer.thickness < 0.0 {
                return Err(MslError::InvalidInput(format!("layer {i}: negative thickness {}", layer.thickness)));
            }
        }
        Ok(Self { left, layers, right })
    }

    /// Structure made of finite layers only, with copies of the outer layers as half-spaces.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| MslError::InvalidInput("structure has no layers".into()))?;
        let left = first.medium.clone();
        let right = layers.last().map(|l| l.medium.clone()).unwrap_or_else(|| left.clone());
        Self::new(left, layers, right)
    }

    pub fn n(&self) -> usize {
        self.left.n()
    }

    /// Interface coordinates `z_l = 0, z_1, …, z_r`.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut z = vec![0.0];
        let mut acc = 0.0;
        for layer in &self.layers {
            acc += layer.thickness;
            z.push(acc);
        }
        z
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }
}

/// Field and linear form at a coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub f: CVec,
    pub a: CVec,
    pub z: f64,
}

impl FieldState {
    /// Stacked `(F; A)` vector.
    pub fn stacked(&self) -> CVec {
        let n = self.f.len();
        CVec::from_fn(2 * n, |i, _| if i < n { self.f[i] } else { self.a[i - n] })
    }

    pub fn from_stacked(v: &CVec, z: f64) -> Self {
        let n = v.len() / 2;
        Self {
            f: v.rows(0, n).into_owned(),
            a: v.rows(n, n).into_owned(),
            z,
        }
    }
}

/// A complex entry stored as `[re, im]`.
pub type ComplexPair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialSpec {
    Msl {
        b: Vec<Vec<ComplexPair>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Vec<ComplexPair>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<Vec<Vec<ComplexPair>>>,
        w: Vec<Vec<ComplexPair>>,
    },
    Quantum {
        mass: f64,
        potential: f64,
    },
    ShPiezo {
        rho: f64,
        c44: f64,
        e15: f64,
        eps11: f64,
    },
}

/// Which parameter a solver sweeps for a given material family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Msl,
    Quantum,
    ShPiezo,
}

impl MaterialSpec {
    pub fn kind(&self) -> ProblemKind {
        match self {
            MaterialSpec::Msl { .. } => ProblemKind::Msl,
            MaterialSpec::Quantum { .. } => ProblemKind::Quantum,
            MaterialSpec::ShPiezo { .. } => ProblemKind::ShPiezo,
        }
    }

    pub fn sh_params(&self, omega: f64, kappa_x: f64) -> Option<ShPiezoParams> {
        match *self {
            MaterialSpec::ShPiezo { rho, c44, e15, eps11 } => Some(ShPiezoParams {
                rho,
                c44,
                e15,
                eps11,
                omega,
                kappa_x,
            }),
            _ => None,
        }
    }

    pub fn instantiate(&self, params: &Parameters) -> Result<MslCoefficients> {
        match self {
            MaterialSpec::Msl { b, p, y, w } => {
                let b = pairs_to_matrix(b, "b")?;
                let n = b.nrows();
                let opt = |m: &Option<Vec<Vec<ComplexPair>>>, name| match m {
                    Some(rows) => pairs_to_matrix(rows, name),
                    None => Ok(CMat::zeros(n, n)),
                };
                MslCoefficients::new(b, opt(p, "p")?, opt(y, "y")?, pairs_to_matrix(w, "w")?)
            }
            MaterialSpec::Quantum { mass, potential } => {
                make_quantum_medium(*mass, *potential, params.energy.unwrap_or(0.0), params.hbar2_over_2)
            }
            MaterialSpec::ShPiezo { .. } => {
                let sp = self
                    .sh_params(params.omega.unwrap_or(0.0), params.kappa_x.unwrap_or(0.0))
                    .expect("sh_piezo variant");
                make_sh_piezo_medium(&sp)
            }
        }
    }
}

fn pairs_to_matrix(rows: &[Vec<ComplexPair>], name: &str) -> Result<CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(MslError::Dimension(format!("matrix {name} must be square and non-empty")));
    }
    Ok(CMat::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn matrix_to_pairs(m: &CMat) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Problem parameters shared by all materials. Missing values default to
/// zero (energy, omega, kappa_x) and one (`hbar2_over_2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default = "one")]
    pub hbar2_over_2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_x: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            hbar2_over_2: 1.0,
            energy: None,
            omega: None,
            kappa_x: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub material: Spanned<String>,
    pub thickness: Spanned<f64>,
}

impl LayerSpec {
    pub fn new(material: impl Into<String>, thickness: f64) -> Self {
        Self {
            material: Spanned::new(0..0, material.into()),
            thickness: Spanned::new(0..0, thickness),
        }
    }
}

/// Parsed structure file, before media are instantiated.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub left: Spanned<String>,
    pub right: Spanned<String>,
    #[serde(default)]
    pub parameters: Parameters,
    pub materials: BTreeMap<String, MaterialSpec>,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    #[serde(skip)]
    source: Option<String>,
}

impl PartialEq for StructureSpec {
    fn eq(&self, other: &Self) -> bool {
        self.left == other.left
            && self.right == other.right
            && self.parameters == other.parameters
            && self.materials == other.materials
            && self.layers == other.layers
    }
}

pub enum StructureSource<'a> {
    Text(&'a str),
    Path(&'a Path),
}

fn line_of(text: Option<&str>, offset: usize) -> Option<usize> {
    text.map(|t| t[..offset.min(t.len())].matches('\n').count() + 1)
}

impl StructureSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec: StructureSpec = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => format!("line {}", line_of(Some(text), span.start).unwrap_or(0)),
                None => "document".to_string(),
            };
            MslError::Structure {
                location,
                message: e.message().to_string(),
            }
        })?;
        spec.source = Some(text.to_string());
        Ok(spec)
    }

    pub fn from_parts(
        left: &str,
        right: &str,
        parameters: Parameters,
        materials: BTreeMap<String, MaterialSpec>,
        layers: Vec<LayerSpec>,
    ) -> Self {
        Self {
            left: Spanned::new(0..0, left.to_string()),
            right: Spanned::new(0..0, right.to_string()),
            parameters,
            materials,
            layers,
            source: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("structure spec is always serializable")
    }

    fn located<T>(&self, span: &Spanned<T>, field: &str) -> String {
        match line_of(self.source.as_deref(), span.span().start) {
            Some(line) => format!("line {line}, {field}"),
            None => field.to_string(),
        }
    }

    fn material(&self, name: &Spanned<String>, field: &str) -> Result<&MaterialSpec> {
        self.materials.get(name.get_ref()).ok_or_else(|| MslError::Structure {
            location: self.located(name, field),
            message: format!("unknown material \"{}\"", name.get_ref()),
        })
    }

    /// Check material references, thicknesses and the common system size,
    /// without building media.
    pub fn check(&self) -> Result<()> {
        self.material(&self.left, "left")?;
        self.material(&self.right, "right")?;
        for (i, layer) in self.layers.iter().enumerate() {
            self.material(&layer.material, &format!("layers[{i}].material"))?;
            let d = *layer.thickness.get_ref();
            if !d.is_finite() || d < 0.0 {
                return Err(MslError::Structure {
                    location: self.located(&layer.thickness, &format!("layers[{i}].thickness")),
                    message: format!("negative thickness {d} in layer {i} ({})", layer.material.get_ref()),
                });
            }
        }
        Ok(())
    }

    /// Material family shared by every referenced material, if uniform.
    pub fn problem_kind(&self) -> Option<ProblemKind> {
        let mut kinds = self
            .used_materials()
            .filter_map(|name| self.materials.get(name))
            .map(MaterialSpec::kind);
        let first = kinds.next()?;
        kinds.all(|k| k == first).then_some(first)
    }

    /// Names of referenced materials, left, layers, right.
    pub fn used_materials(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.left.get_ref().as_str())
            .chain(self.layers.iter().map(|l| l.material.get_ref().as_str()))
            .chain(std::iter::once(self.right.get_ref().as_str()))
    }

    pub fn material_by_name(&self, name: &str) -> Option<&MaterialSpec> {
        self.materials.get(name)
    }

    /// Build media with `params` in place of the file's parameters.
    pub fn instantiate(&self, params: &Parameters) -> Result<LayeredStructure> {
        self.check()?;
        let mut cache: BTreeMap<String, MslCoefficients> = BTreeMap::new();
        let mut build = |name: &Spanned<String>, field: String| -> Result<MslCoefficients> {
            if let Some(m) = cache.get(name.get_ref().as_str()) {
                return Ok(m.clone());
            }
            let spec = self.material(name, &field)?;
            let medium = spec.instantiate(params).map_err(|e| match e {
                MslError::SingularB { .. } | MslError::InvalidInput(_) => e,
                other => MslError::Structure {
                    location: self.located(name, &field),
                    message: format!("material \"{}\": {other}", name.get_ref()),
                },
            })?;
            cache.insert(name.get_ref().clone(), medium.clone());
            Ok(medium)
        };
        let left = build(&self.left, "left".into())?;
        let right = build(&self.right, "right".into())?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let medium = build(&spec.material, format!("layers[{i}].material"))?;
            if medium.n() != left.n() {
                return Err(MslError::Structure {
                    location: self.located(&spec.material, &format!("layers[{i}].material")),
                    message: format!("layer {i} has N = {}, left half-space has N = {}", medium.n(), left.n()),
                });
            }
            layers.push(Layer::new(medium, *spec.thickness.get_ref())?.labeled(spec.material.get_ref().clone()));
        }
        if right.n() != left.n() {
            return Err(MslError::Structure {
                location: self.located(&self.right, "right"),
                message: format!("right half-space has N = {}, left has N = {}", right.n(), left.n()),
            });
        }
        LayeredStructure::new(left, layers, right)
    }

    /// Same structure with a different stack of layers.
    pub fn with_layers(&self, layers: Vec<LayerSpec>) -> Self {
        Self {
            layers,
            source: None,
            ..self.clone()
        }
    }
}

pub fn load_structure_spec(source: StructureSource<'_>) -> Result<StructureSpec> {
    match source {
        StructureSource::Text(text) => StructureSpec::parse(text),
        StructureSource::Path(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| MslError::Structure {
                location: path.display().to_string(),
                message: e.to_string(),
            })?;
            StructureSpec::parse(&text)
        }
    }
}

/// Parse and instantiate a structure file with its own `[parameters]`.
pub fn load_structure(source: StructureSource<'_>) -> Result<LayeredStructure> {
    let spec = load_structure_spec(source)?;
    spec.instantiate(&spec.parameters)
}

/// Scalar entry helper for tests and builders.
pub fn pair(z: Complex64) -> ComplexPair {
    [z.re, z.im]
}
