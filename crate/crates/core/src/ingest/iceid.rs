use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};

use super::{open_csv, DatasetManifest};
use crate::error::{Error, Result};
use crate::featurize::{canonical_column, normalize_id, normalize_record, PersonRecord};

const REQUIRED_PEOPLE_COLUMNS: [&str; 2] = ["id", "heimild"];
const REQUIRED_REGION_COLUMNS: [&str; 2] = ["id", "name"];

/// Region id to human-readable name, per level of the territorial hierarchy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionNames {
    pub counties: HashMap<String, String>,
    pub districts: HashMap<String, String>,
    pub parishes: HashMap<String, String>,
}

impl RegionNames {
    pub fn county(&self, r: &PersonRecord) -> Option<&str> {
        r.county.as_ref().and_then(|id| self.counties.get(id)).map(String::as_str)
    }

    pub fn district(&self, r: &PersonRecord) -> Option<&str> {
        r.district.as_ref().and_then(|id| self.districts.get(id)).map(String::as_str)
    }

    pub fn parish(&self, r: &PersonRecord) -> Option<&str> {
        r.parish.as_ref().and_then(|id| self.parishes.get(id)).map(String::as_str)
    }
}

#[derive(Debug, Clone, Default)]
pub struct IceidData {
    pub records: Vec<PersonRecord>,
    pub regions: RegionNames,
    /// Data rows seen in the people table, including skipped ones.
    pub rows_read: usize,
    pub rows_skipped: usize,
}

fn header_index(headers: &csv::StringRecord) -> Vec<String> {
    headers.iter().map(canonical_column).collect()
}

fn require(columns: &[String], required: &[&str], path: &Path) -> Result<()> {
    for &col in required {
        if !columns.iter().any(|c| c == col) {
            return Err(Error::Schema { path: path.to_path_buf(), column: col.to_string() });
        }
    }
    Ok(())
}

/// Reads a people table. Malformed rows are logged, counted and skipped.
pub fn read_people<R: Read>(input: R, origin: &Path) -> Result<(Vec<PersonRecord>, usize, usize)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let columns = header_index(reader.headers()?);
    if columns.is_empty() || columns == [""] {
        warn!("{}: empty people table", origin.display());
        return Ok((Vec::new(), 0, 0));
    }
    require(&columns, &REQUIRED_PEOPLE_COLUMNS, origin)?;

    let (mut records, mut read, mut skipped) = (Vec::new(), 0usize, 0usize);
    for (i, row) in reader.records().enumerate() {
        read += 1;
        // Line 1 is the header.
        let line = i + 2;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                warn!("{}:{line}: skipping unreadable row: {e}", origin.display());
                skipped += 1;
                continue;
            }
        };
        if row.len() != columns.len() {
            warn!("{}:{line}: skipping row with {} fields, expected {}", origin.display(), row.len(), columns.len());
            skipped += 1;
            continue;
        }
        match normalize_record(columns.iter().zip(row.iter())) {
            Ok(r) => records.push(r),
            Err(e) => {
                warn!("{}:{line}: skipping row: {e}", origin.display());
                skipped += 1;
            }
        }
    }
    Ok((records, read, skipped))
}

fn read_regions(path: &Path) -> Result<HashMap<String, String>> {
    let mut reader = open_csv(path)?;
    let columns = header_index(reader.headers()?);
    if columns.is_empty() || columns == [""] {
        warn!("{}: empty region table", path.display());
        return Ok(HashMap::new());
    }
    require(&columns, &REQUIRED_REGION_COLUMNS, path)?;
    let id_at = columns.iter().position(|c| c == "id").unwrap_or_default();
    let name_at = columns.iter().position(|c| c == "name").unwrap_or_default();
    let mut names = HashMap::new();
    for row in reader.records() {
        let row = row?;
        if let (Some(id), Some(name)) = (row.get(id_at).and_then(normalize_id), row.get(name_at)) {
            names.insert(id, name.trim().to_string());
        }
    }
    Ok(names)
}

/// Loads the people table and left-joins region names onto it.
pub fn load_iceid(manifest: &DatasetManifest) -> Result<IceidData> {
    let DatasetManifest::Iceid { people, counties, districts, parishes } = manifest else {
        return Err(Error::Config(format!("expected an iceid manifest, got {}", manifest.kind())));
    };
    let load = |p: &Option<PathBuf>| p.as_deref().map(read_regions).transpose().map(Option::unwrap_or_default);
    let regions = RegionNames { counties: load(counties)?, districts: load(districts)?, parishes: load(parishes)? };

    let file = std::fs::File::open(people).map_err(|e| Error::io(people, e))?;
    let (records, rows_read, rows_skipped) = read_people(std::io::BufReader::new(file), people)?;
    info!("{}: ingested {} rows, skipped {rows_skipped} malformed", people.display(), records.len());
    Ok(IceidData { records, regions, rows_read, rows_skipped })
}

const RECORD_COLUMNS: [&str; 22] = [
    "id",
    "heimild",
    "nafn_norm",
    "first_name",
    "patronym",
    "surname",
    "full_name",
    "birthyear",
    "sex",
    "status",
    "marriagestatus",
    "farm",
    "parish",
    "parish_name",
    "district",
    "district_name",
    "county",
    "county_name",
    "partner",
    "father",
    "mother",
    "person",
];

/// Writes normalized records with joined region names as CSV.
pub fn write_records<W: Write>(data: &IceidData, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    let opt = |v: &Option<String>| v.clone().unwrap_or_default();
    for r in &data.records {
        let by = r.birthyear.map(|b| b.to_string()).unwrap_or_default();
        let sex = match r.sex_male {
            Some(true) => "m",
            Some(false) => "f",
            None => "",
        };
        let person = r.person.clone().unwrap_or_else(|| "-1".into());
        w.write_record([
            r.id.clone(),
            r.heimild.to_string(),
            r.nafn_norm.clone(),
            r.first_name.clone(),
            r.patronym.clone(),
            r.surname.clone(),
            r.full_name.clone(),
            by,
            sex.into(),
            opt(&r.status),
            opt(&r.marriagestatus),
            opt(&r.farm),
            opt(&r.parish),
            data.regions.parish(r).unwrap_or_default().into(),
            opt(&r.district),
            data.regions.district(r).unwrap_or_default().into(),
            opt(&r.county),
            data.regions.county(r).unwrap_or_default().into(),
            opt(&r.partner),
            opt(&r.father),
            opt(&r.mother),
            person,
        ])?;
    }
    w.flush().map_err(|e| Error::io("records", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn people(text: &str) -> Result<(Vec<PersonRecord>, usize, usize)> {
        read_people(text.as_bytes(), Path::new("people.csv"))
    }

    #[test]
    fn well_formed_rows_are_all_kept() {
        let (recs, read, skipped) =
            people("id,heimild,first_name,person\n1,1703,Jón,10\n2,1729,Jón,10\n3,1801,Guðrún,-1\n").unwrap();
        assert_eq!((recs.len(), read, skipped), (3, 3, 0));
        assert!(!recs[2].is_labeled());
    }

    #[test]
    fn malformed_rows_are_skipped_and_counted() {
        let (recs, read, skipped) = people("id,heimild,first_name\n1,1703,a\n2,1703\n3,xx,c\n4,1801,d\n").unwrap();
        assert_eq!(recs.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["1", "4"]);
        assert_eq!((read, skipped), (4, 2));
    }

    #[test]
    fn missing_column_names_it() {
        match people("id,first_name\n1,a\n") {
            Err(Error::Schema { column, .. }) => assert_eq!(column, "heimild"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_yields_nothing() {
        assert_eq!(people("").unwrap().0.len(), 0);
    }

    #[test]
    fn unknown_parish_keeps_the_record() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("people.csv"), "id,heimild,parish\n1,1703,12\n2,1703,99\n3,1703,\n").unwrap();
        std::fs::write(dir.path().join("parishes.csv"), "id,name,lat,lon\n12.0,Reykholt,64.6,-21.3\n").unwrap();
        let manifest: DatasetManifest =
            serde_json::from_str(r#"{"kind":"iceid","people":"people.csv","parishes":"parishes.csv"}"#).unwrap();
        let data = load_iceid(&manifest.resolve(dir.path())).unwrap();
        assert_eq!(data.records.len(), 3);
        assert_eq!(data.regions.parish(&data.records[0]), Some("Reykholt"));
        assert_eq!(data.regions.parish(&data.records[1]), None);
        assert_eq!(data.records[1].parish.as_deref(), Some("99"));

        let mut buf = Vec::new();
        write_records(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().contains(",12,Reykholt,"));
    }
}
