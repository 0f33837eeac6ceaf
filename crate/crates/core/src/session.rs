//! Sessions: an append-only record of one analysis, from source data to stationary points.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continuation::{BranchPointEstimate, DerivativeGrid, SeedRegion, StationaryPoint, Trajectory};
use crate::error::{Error, Result};
use crate::io::{to_json, ImportFormat, Units};
use crate::model::{BasisSpec, ModelSpec};
use crate::schlessinger::{ContinuedFraction, FitDiagnostics};
use crate::stabilization::{AvoidedCrossing, StabilizationData, StableWindow, WindowOptions, WindowReport};
use crate::ucs::{Landscape, UcsStationaryPoint};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Model { model: ModelSpec, basis: BasisSpec },
    Import { path: String, format: ImportFormat, annotations: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationRecord {
    pub id: String,
    pub data: StabilizationData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowsRecord {
    pub id: String,
    pub stabilization_id: String,
    pub options: WindowOptions,
    pub report: WindowReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub id: String,
    pub stabilization_id: String,
    pub window: StableWindow,
    /// Grid indices of the fitted points.
    pub point_indices: Vec<usize>,
    /// Set when the fit was forced over detected crossings.
    pub forced: bool,
    pub crossings: Vec<AvoidedCrossing>,
    pub fraction: ContinuedFraction,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: String,
    pub fit_id: String,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub id: String,
    pub fit_id: String,
    pub region: SeedRegion,
    pub point_ids: Vec<String>,
    /// |C′| over the seed grid when nothing survived the filters.
    pub landscape: Option<DerivativeGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryRecord {
    pub search_id: String,
    pub fit_id: String,
    pub point: StationaryPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckRecord {
    pub id: String,
    pub stationary_id: String,
    pub ucs: UcsStationaryPoint,
    /// |E_Padé − E_UCS|.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRecord {
    pub id: String,
    pub session_id: String,
    pub reference_energy: f64,
    pub landscape: Landscape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPointRecord {
    pub id: String,
    pub windows_id: String,
    pub crossing: AvoidedCrossing,
    pub estimate: BranchPointEstimate,
    /// Log-log slope of |E₊ − E₋| against |η − η_BP|.
    pub gap_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub id: String,
    pub created_at: String,
    pub source: Source,
    pub units: Units,
    pub stabilization: Option<StabilizationRecord>,
    pub windows: Vec<WindowsRecord>,
    pub fits: Vec<FitRecord>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub searches: Vec<SearchRecord>,
    pub stationary_points: Vec<StationaryRecord>,
    pub crosschecks: Vec<CrosscheckRecord>,
    pub landscapes: Vec<LandscapeRecord>,
    pub branch_points: Vec<BranchPointRecord>,
}

/// RFC 3339 UTC; `SOURCE_DATE_EPOCH` pins it for reproducible files.
fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse::<i64>().ok());
    let t = match fixed.and_then(|s| chrono::DateTime::from_timestamp(s, 0)) {
        Some(t) => t,
        None => chrono::Utc::now(),
    };
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl Session {
    /// New empty session. The id hashes the source plus `salt`, so equal inputs give equal ids.
    pub fn new(source: Source, units: Units, salt: &str) -> Self {
        let id = crate::ids::content_id("s", &format!("{}|{salt}", serde_json::to_string(&source).expect("source")));
        Self {
            schema_version: SCHEMA_VERSION,
            id,
            created_at: timestamp(),
            source,
            units,
            stabilization: None,
            windows: Vec::new(),
            fits: Vec::new(),
            trajectories: Vec::new(),
            searches: Vec::new(),
            stationary_points: Vec::new(),
            crosschecks: Vec::new(),
            landscapes: Vec::new(),
            branch_points: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: Option<u32>,
        }
        let parse_err = |e: serde_json::Error| Error::Parse { line: e.line(), field: "session".into(), message: e.to_string() };
        let v: Version = serde_json::from_str(text).map_err(parse_err)?;
        let found = v.schema_version.unwrap_or(0);
        if found != SCHEMA_VERSION {
            return Err(Error::Migration { found, supported: SCHEMA_VERSION });
        }
        let s: Session = serde_json::from_str(text).map_err(parse_err)?;
        s.check_links()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn stabilization(&self) -> Result<&StabilizationRecord> {
        self.stabilization.as_ref().ok_or_else(|| Error::NotFound("stabilization data (run stabilize first)".into()))
    }

    pub fn fit(&self, id: &str) -> Result<&FitRecord> {
        self.fits.iter().find(|f| f.id == id).ok_or_else(|| Error::NotFound(format!("fit {id}")))
    }

    pub fn stationary(&self, id: &str) -> Result<&StationaryRecord> {
        self.stationary_points.iter().find(|p| p.point.id == id).ok_or_else(|| Error::NotFound(format!("stationary point {id}")))
    }

    pub fn search(&self, id: &str) -> Result<&SearchRecord> {
        self.searches.iter().find(|s| s.id == id).ok_or_else(|| Error::NotFound(format!("search {id}")))
    }

    /// Points of one search, in search order.
    pub fn search_points(&self, search_id: &str) -> Vec<&StationaryRecord> {
        self.stationary_points.iter().filter(|p| p.search_id == search_id).collect()
    }

    /// Every derived object's parent id must exist.
    pub fn check_links(&self) -> Result<()> {
        let broken = |what: &str, id: &str| Err(Error::validation("session", format!("{what} links to missing {id}")));
        let stab = self.stabilization.as_ref().map(|s| s.id.as_str());
        for w in &self.windows {
            if Some(w.stabilization_id.as_str()) != stab {
                return broken(&w.id, &w.stabilization_id);
            }
        }
        for f in &self.fits {
            if Some(f.stabilization_id.as_str()) != stab {
                return broken(&f.id, &f.stabilization_id);
            }
        }
        for t in &self.trajectories {
            if self.fit(&t.fit_id).is_err() {
                return broken(&t.id, &t.fit_id);
            }
        }
        for s in &self.searches {
            if self.fit(&s.fit_id).is_err() {
                return broken(&s.id, &s.fit_id);
            }
        }
        for p in &self.stationary_points {
            if self.search(&p.search_id).is_err() {
                return broken(&p.point.id, &p.search_id);
            }
        }
        for c in &self.crosschecks {
            if self.stationary(&c.stationary_id).is_err() {
                return broken(&c.id, &c.stationary_id);
            }
        }
        for l in &self.landscapes {
            if l.session_id != self.id {
                return broken(&l.id, &l.session_id);
            }
        }
        for b in &self.branch_points {
            if !self.windows.iter().any(|w| w.id == b.windows_id) {
                return broken(&b.id, &b.windows_id);
            }
        }
        Ok(())
    }
}
