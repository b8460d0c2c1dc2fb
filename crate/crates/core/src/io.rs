//! File formats: model, ellipse and fit-result JSON; point and trace CSV.
//!
//! Floats are written with 17 significant digits so values round-trip.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::{
    GeodesicNormal, IsotropicGeodesicNormal, KentDistribution, Model, VonMisesFisher,
};
use crate::ellipse::SphericalEllipse;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::sphere::{Frame3, UnitVec3};

/// Allowed departure from orthonormality in JSON frames.
pub const FRAME_TOL: f64 = 1e-8;
/// Point rows further than this from unit norm are renormalized with a warning.
pub const POINT_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GeodesicNormal,
    IsotropicGn,
    Vmf,
    Kent,
}

/// Unknown fields are ignored, so a fit result file is also a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    pub mu: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ovalness: Option<f64>,
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::Format(format!("missing field `{name}`")))
}

fn unit_within(v: [f64; 3], name: &str) -> Result<UnitVec3> {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > FRAME_TOL {
        return Err(Error::NotOrthonormal(format!("`{name}` has norm {norm}")));
    }
    UnitVec3::from_array(v)
}

/// Checks the columns against `FRAME_TOL` and re-orthonormalizes them.
/// Without `xi` the frame is completed right-handed.
pub fn frame_from_json(mu: [f64; 3], eta: [f64; 3], xi: Option<[f64; 3]>) -> Result<Frame3> {
    let mu = unit_within(mu, "mu")?;
    let eta_raw = unit_within(eta, "eta")?;
    let overlap = mu.dot(&eta_raw);
    if overlap.abs() > FRAME_TOL {
        return Err(Error::NotOrthonormal(format!("mu.eta = {overlap:e}")));
    }
    let eta = UnitVec3::from_vector(eta_raw.as_vector() - overlap * mu.as_vector())?;
    let right = UnitVec3::from_vector(mu.as_vector().cross(eta.as_vector()))?;
    let xi = match xi {
        None => right,
        Some(raw) => {
            let raw = unit_within(raw, "xi")?;
            let (a, b) = (raw.dot(&mu), raw.dot(&eta_raw));
            if a.abs() > FRAME_TOL || b.abs() > FRAME_TOL {
                return Err(Error::NotOrthonormal(format!(
                    "xi.mu = {a:e}, xi.eta = {b:e}"
                )));
            }
            if raw.dot(&right) > 0.0 {
                right
            } else {
                right.antipode()
            }
        }
    };
    Frame3::new(mu, eta, xi)
}

impl ModelJson {
    pub fn to_model(&self) -> Result<Model> {
        let mu = || unit_within(self.mu, "mu");
        let frame = || frame_from_json(self.mu, required(self.eta, "eta")?, self.xi);
        Ok(match self.kind {
            ModelKind::GeodesicNormal => GeodesicNormal::new(
                frame()?,
                required(self.lambda1, "lambda1")?,
                required(self.lambda2, "lambda2")?,
            )?
            .into(),
            ModelKind::IsotropicGn => {
                IsotropicGeodesicNormal::new(mu()?, required(self.kappa, "kappa")?)?.into()
            }
            ModelKind::Vmf => VonMisesFisher::new(mu()?, required(self.kappa, "kappa")?)?.into(),
            ModelKind::Kent => KentDistribution::new(
                frame()?,
                required(self.kappa, "kappa")?,
                required(self.ovalness, "ovalness")?,
            )?
            .into(),
        })
    }

    pub fn from_model(model: &Model) -> Self {
        let blank = |kind, mu: &UnitVec3| ModelJson {
            kind,
            mu: mu.to_array(),
            eta: None,
            xi: None,
            lambda1: None,
            lambda2: None,
            kappa: None,
            ovalness: None,
        };
        match model {
            Model::GeodesicNormal(m) => ModelJson {
                eta: Some(m.frame().eta().to_array()),
                xi: Some(m.frame().xi().to_array()),
                lambda1: Some(m.lambda1()),
                lambda2: Some(m.lambda2()),
                ..blank(ModelKind::GeodesicNormal, m.mu())
            },
            Model::Isotropic(m) => ModelJson {
                kappa: Some(m.kappa()),
                ..blank(ModelKind::IsotropicGn, m.mu())
            },
            Model::VonMisesFisher(m) => ModelJson {
                kappa: Some(m.kappa()),
                ..blank(ModelKind::Vmf, m.mu())
            },
            Model::Kent(m) => ModelJson {
                eta: Some(m.frame().eta().to_array()),
                xi: Some(m.frame().xi().to_array()),
                kappa: Some(m.kappa()),
                ovalness: Some(m.ovalness()),
                ..blank(ModelKind::Kent, m.frame().mu())
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipseJson {
    pub mu: [f64; 3],
    pub eta: [f64; 3],
    pub xi: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
}

impl EllipseJson {
    pub fn to_ellipse(&self) -> Result<SphericalEllipse> {
        SphericalEllipse::new(
            frame_from_json(self.mu, self.eta, Some(self.xi))?,
            self.alpha,
            self.beta,
        )
    }

    pub fn from_ellipse(e: &SphericalEllipse) -> Self {
        EllipseJson {
            mu: e.frame().mu().to_array(),
            eta: e.frame().eta().to_array(),
            xi: e.frame().xi().to_array(),
            alpha: e.alpha(),
            beta: e.beta(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResultJson {
    #[serde(flatten)]
    pub model: ModelJson,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub n_objective_evals: usize,
    pub n_integrations: usize,
    pub initial_model: ModelJson,
}

impl From<&FitResult> for FitResultJson {
    fn from(r: &FitResult) -> Self {
        FitResultJson {
            model: ModelJson::from_model(&r.model.into()),
            log_likelihood: r.log_likelihood,
            n_obs: r.n_obs,
            converged: r.converged,
            n_objective_evals: r.n_objective_evals,
            n_integrations: r.n_integrations,
            initial_model: ModelJson::from_model(&r.initial_model.into()),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Deserialize)]
struct PointRow {
    x1: f64,
    x2: f64,
    x3: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    pub points: Vec<UnitVec3>,
    /// Zero-based data rows whose norm was off by more than `POINT_NORM_TOL`.
    pub renormalized: Vec<usize>,
}

/// Reads a CSV with header `x1,x2,x3`, normalizing every row.
pub fn read_points<R: Read>(reader: R) -> Result<PointSet> {
    let mut set = PointSet::default();
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    for (i, row) in csv.deserialize::<PointRow>().enumerate() {
        let row = row?;
        let v = [row.x1, row.x2, row.x3];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        // rows already unit to rounding are kept bit-for-bit
        let x = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitVec3::from_unit_unchecked(v.into())
        } else {
            UnitVec3::from_array(v).map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?
        };
        if (norm - 1.0).abs() > POINT_NORM_TOL {
            set.renormalized.push(i);
        }
        set.points.push(x);
    }
    Ok(set)
}

pub fn read_points_file(path: &Path) -> Result<PointSet> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_points(file).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with a header row and one row of floats per record.
pub fn csv_string<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|v| format_float(*v)))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn points_csv(points: &[UnitVec3]) -> Result<String> {
    csv_string(&["x1", "x2", "x3"], points.iter().map(|x| x.to_array()))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::complete_frame;

    #[test]
    fn model_json_round_trip() {
        let frame = complete_frame(&UnitVec3::new(0.1, 0.2, 0.9).unwrap(), None).unwrap();
        let models: Vec<Model> = vec![
            GeodesicNormal::new(frame, 2.0, 7.5).unwrap().into(),
            IsotropicGeodesicNormal::new(*frame.mu(), 3.0)
                .unwrap()
                .into(),
            VonMisesFisher::new(*frame.mu(), 4.0).unwrap().into(),
            KentDistribution::new(frame, 10.0, 2.0).unwrap().into(),
        ];
        for m in models {
            let text = to_json_string(&ModelJson::from_model(&m)).unwrap();
            let back: ModelJson = serde_json::from_str(&text).unwrap();
            let back = back.to_model().unwrap();
            let x = UnitVec3::new(0.3, -0.1, 0.8).unwrap();
            assert!((back.log_density_unnorm(&x) - m.log_density_unnorm(&x)).abs() < 1e-14);
        }
    }

    #[test]
    fn model_json_schema() {
        let text = r#"{"type": "geodesic_normal", "mu": [1, 0, 0], "eta": [0, 1, 0], "lambda1": 4, "lambda2": 16}"#;
        let m = serde_json::from_str::<ModelJson>(text)
            .unwrap()
            .to_model()
            .unwrap();
        let Model::GeodesicNormal(g) = m else {
            panic!()
        };
        assert_eq!(g.frame().xi(), &UnitVec3::e3());

        let text = r#"{"type": "vmf", "mu": [0, 0, 1], "kappa": 2}"#;
        assert!(matches!(
            serde_json::from_str::<ModelJson>(text)
                .unwrap()
                .to_model()
                .unwrap(),
            Model::VonMisesFisher(_)
        ));

        let missing = r#"{"type": "kent", "mu": [0, 0, 1], "eta": [1, 0, 0], "kappa": 2}"#;
        assert!(matches!(
            serde_json::from_str::<ModelJson>(missing)
                .unwrap()
                .to_model(),
            Err(Error::Format(_))
        ));
        assert!(
            serde_json::from_str::<ModelJson>(r#"{"type": "bingham", "mu": [0, 0, 1]}"#).is_err()
        );
    }

    #[test]
    fn frames_are_checked_and_cleaned() {
        let f = frame_from_json([1.0, 0.0, 0.0], [1e-9, 1.0, 0.0], Some([0.0, 0.0, -1.0])).unwrap();
        assert!(f.mu().dot(f.eta()).abs() < 1e-16);
        assert_eq!(f.xi().x3(), -1.0);
        assert!(matches!(
            frame_from_json([1.0, 0.0, 0.0], [1e-6, 1.0, 0.0], None),
            Err(Error::NotOrthonormal(_))
        ));
        assert!(matches!(
            frame_from_json([2.0, 0.0, 0.0], [0.0, 1.0, 0.0], None),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn ellipse_json_round_trip() {
        let e = SphericalEllipse::new(Frame3::standard(), 0.5, 0.25).unwrap();
        let parsed = EllipseJson::from_ellipse(&e);
        let back: EllipseJson = serde_json::from_str(&to_json_string(&parsed).unwrap()).unwrap();
        assert_eq!(back.to_ellipse().unwrap(), e);
    }

    #[test]
    fn points_are_renormalized() {
        let set = read_points("x1,x2,x3\n1,0,0\n2,0,0\n0, 0.6, 0.8\n".as_bytes()).unwrap();
        assert_eq!(set.points.len(), 3);
        assert_eq!(set.points[1], UnitVec3::e1());
        assert_eq!(set.renormalized, vec![1]);
        assert!(matches!(
            read_points("x1,x2,x3\n0,0,0\n".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_points("x1,x2,x3\n1,a,0\n".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_points("a,b\n1,0\n".as_bytes()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let x = UnitVec3::new(0.1, 0.2, 0.3).unwrap();
        let text = points_csv(&[x]).unwrap();
        assert_eq!(read_points(text.as_bytes()).unwrap().points[0], x);
    }

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
