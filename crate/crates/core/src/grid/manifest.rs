use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_alignment, read_grid, Grid, GridError, GridFrame, GridKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub path: PathBuf,
    pub kind: GridKind,
}

/// Predictor name → raster file. Relative paths resolve against the
/// manifest's directory.
///
/// ```toml
/// [layers.H95_ALS]
/// path = "h95.asc"
/// kind = "continuous"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RasterManifest {
    pub layers: BTreeMap<String, LayerSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RasterManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<RasterManifest, GridError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: RasterManifest = toml::from_str(&text).map_err(|e| GridError::Manifest {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn resolve(&self, spec: &LayerSpec) -> PathBuf {
        if spec.path.is_absolute() {
            spec.path.clone()
        } else {
            self.base_dir.join(&spec.path)
        }
    }

    /// Read every listed layer after checking that the required names are
    /// present, then check alignment.
    pub fn load_layers(&self, required: &[&str]) -> Result<(GridFrame, BTreeMap<String, Grid>), GridError> {
        if let Some(missing) = required.iter().find(|n| !self.layers.contains_key(**n)) {
            return Err(GridError::Manifest {
                path: self.base_dir.display().to_string(),
                message: format!("required layer {missing} is not listed"),
            });
        }
        let mut grids = BTreeMap::new();
        for (name, spec) in &self.layers {
            let grid = read_grid(self.resolve(spec), spec.kind)?;
            grids.insert(name.clone(), grid);
        }
        let frame = check_alignment(grids.iter().map(|(n, g)| (n.as_str(), g)))?;
        Ok((frame, grids))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{write_grid_file, GridFrame};

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let frame = GridFrame {
            ncols: 3,
            nrows: 2,
            xll: 0.0,
            yll: 0.0,
            cellsize: 16.0,
        };
        write_grid_file(&Grid::filled(frame, GridKind::Continuous, 1.5), dir.path().join("a.asc")).unwrap();
        write_grid_file(&Grid::filled(frame, GridKind::Categorical, 2.0), dir.path().join("b.asc")).unwrap();
        let text = "[layers.A]\npath = \"a.asc\"\nkind = \"continuous\"\n\n[layers.B]\npath = \"b.asc\"\nkind = \"categorical\"\n";
        std::fs::write(dir.path().join("m.toml"), text).unwrap();
        let m = RasterManifest::load(dir.path().join("m.toml")).unwrap();
        let (f, grids) = m.load_layers(&["A", "B"]).unwrap();
        assert_eq!(f, frame);
        assert_eq!(grids["B"].kind, GridKind::Categorical);
        assert!(matches!(m.load_layers(&["A", "C"]), Err(GridError::Manifest { .. })));
    }
}
