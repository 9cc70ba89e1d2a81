//! Dataset manifests and loaders for census tables and two-table ER
//! benchmarks.

mod generic;
mod graph;
mod iceid;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generic::{generic_judgments, jaccard_bin, load_generic, GenericRecord, GenericUniverse};
pub use graph::{export_temporal_graph, write_edges};
pub use iceid::{load_iceid, read_people, write_records, IceidData, RegionNames};

/// Describes where a dataset's tables live. Relative paths resolve against
/// the manifest's own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetManifest {
    Iceid {
        people: PathBuf,
        #[serde(default)]
        counties: Option<PathBuf>,
        #[serde(default)]
        districts: Option<PathBuf>,
        #[serde(default)]
        parishes: Option<PathBuf>,
    },
    GenericEr {
        table_a: PathBuf,
        table_b: PathBuf,
        matches: PathBuf,
        #[serde(default = "default_id_column")]
        id_column: String,
        #[serde(default = "default_left_id")]
        left_id_column: String,
        #[serde(default = "default_right_id")]
        right_id_column: String,
        #[serde(default = "default_label_column")]
        label_column: String,
        /// Attributes compared as numbers rather than token sets.
        #[serde(default)]
        numeric_attributes: Vec<String>,
    },
}

fn default_id_column() -> String {
    "id".into()
}
fn default_left_id() -> String {
    "ltable_id".into()
}
fn default_right_id() -> String {
    "rtable_id".into()
}
fn default_label_column() -> String {
    "label".into()
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(manifest.resolve(path.parent().unwrap_or(Path::new("."))))
    }

    /// Rebases relative paths onto `base`.
    pub fn resolve(self, base: &Path) -> Self {
        let fix = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        match self {
            DatasetManifest::Iceid { people, counties, districts, parishes } => DatasetManifest::Iceid {
                people: fix(people),
                counties: counties.map(fix),
                districts: districts.map(fix),
                parishes: parishes.map(fix),
            },
            DatasetManifest::GenericEr {
                table_a,
                table_b,
                matches,
                id_column,
                left_id_column,
                right_id_column,
                label_column,
                numeric_attributes,
            } => DatasetManifest::GenericEr {
                table_a: fix(table_a),
                table_b: fix(table_b),
                matches: fix(matches),
                id_column,
                left_id_column,
                right_id_column,
                label_column,
                numeric_attributes,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DatasetManifest::Iceid { .. } => "iceid",
            DatasetManifest::GenericEr { .. } => "generic_er",
        }
    }

    /// Every file the manifest references.
    pub fn files(&self) -> Vec<&Path> {
        match self {
            DatasetManifest::Iceid { people, counties, districts, parishes } => std::iter::once(people.as_path())
                .chain([counties, districts, parishes].into_iter().flatten().map(PathBuf::as_path))
                .collect(),
            DatasetManifest::GenericEr { table_a, table_b, matches, .. } => {
                vec![table_a.as_path(), table_b.as_path(), matches.as_path()]
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in self.files() {
            if !f.is_file() {
                return Err(Error::io(f, std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist")));
            }
        }
        Ok(())
    }
}

pub(crate) fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}
