//! CSV ingestion and export.
//!
//! One sample per row with a header. Sequential cells are `|`-joined
//! tokens; categorical strings outside the vocabulary map to the OOV index.

use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{FeatureValue, MultiDomainDataset, Sample, Split};
use super::schema::{equal_frequency_edges, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

pub const SEQ_SEPARATOR: char = '|';
const OOV_TOKEN: &str = "__oov__";

pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<MultiDomainDataset> {
    load_csv_as(path, schema, Split::Train)
}

pub fn load_csv_as(path: &Path, schema: &FeatureSchema, split: Split) -> Result<MultiDomainDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, split)
}

/// Parses CSV text against `schema`. Numerical features without bin edges
/// get equal-frequency edges fitted on this input.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, split: Split) -> Result<MultiDomainDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let domain_col = column(&schema.domain_field)?;
    let label_col = column(&schema.label_field)?;
    let feature_cols = schema
        .features
        .iter()
        .map(|f| column(&f.name))
        .collect::<Result<Vec<_>>>()?;

    // First pass: parse raw cells so unfitted numerical features can be binned.
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        let raw_domain = record.get(domain_col).unwrap_or("");
        let domain = schema.domain_id(raw_domain).ok_or_else(|| {
            Error::Value(format!("row {row}: unknown domain `{raw_domain}`"))
        })? as u32;
        let raw_label = record.get(label_col).unwrap_or("").trim();
        let label = match raw_label.parse::<f64>() {
            Ok(v) if v == 0.0 => 0u8,
            Ok(v) if v == 1.0 => 1u8,
            _ => {
                return Err(Error::Value(format!(
                    "row {row}: label `{raw_label}` not in {{0,1}}"
                )))
            }
        };
        let mut cells = Vec::with_capacity(feature_cols.len());
        for (spec, &col) in schema.features.iter().zip(&feature_cols) {
            let cell = record.get(col).unwrap_or("");
            let raw = match spec.kind {
                FeatureKind::Numerical => {
                    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                        row,
                        msg: format!("non-numeric value `{cell}` in column `{}`", spec.name),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row,
                            msg: format!("non-finite value in column `{}`", spec.name),
                        });
                    }
                    RawCell::Number(v)
                }
                FeatureKind::Categorical => RawCell::Text(cell.to_string()),
            };
            cells.push(raw);
        }
        rows.push((domain, label, cells));
    }

    let mut fitted = schema.clone();
    for (j, spec) in fitted.features.iter_mut().enumerate() {
        if spec.kind == FeatureKind::Numerical && !spec.has_edges() {
            let values: Vec<f64> = rows
                .iter()
                .map(|(_, _, cells)| match cells[j] {
                    RawCell::Number(v) => v,
                    RawCell::Text(_) => unreachable!(),
                })
                .collect();
            let edges = equal_frequency_edges(&values, spec.num_bins.unwrap_or(10))?;
            spec.num_bins = Some(edges.len() - 1);
            spec.bin_edges = edges;
        }
    }

    let lookup = fitted.vocab_lookup();
    let max_len = fitted.max_seq_len;
    let samples = rows
        .into_iter()
        .map(|(domain, label, cells)| {
            let values = fitted
                .features
                .iter()
                .zip(cells)
                .enumerate()
                .map(|(j, (spec, cell))| match (spec.kind, cell) {
                    (FeatureKind::Numerical, RawCell::Number(v)) => FeatureValue::Numerical {
                        bin: spec.bin_of(v) as u32,
                        raw: v,
                    },
                    (FeatureKind::Categorical, RawCell::Text(t)) => {
                        let encode =
                            |tok: &str| *lookup[j].get(tok).unwrap_or(&spec.oov_index()) as u32;
                        if spec.is_sequential() {
                            let mut toks: Vec<u32> = if t.is_empty() {
                                Vec::new()
                            } else {
                                t.split(SEQ_SEPARATOR).map(encode).collect()
                            };
                            toks.truncate(max_len);
                            FeatureValue::Sequence(toks)
                        } else {
                            FeatureValue::Categorical(encode(&t))
                        }
                    }
                    _ => unreachable!(),
                })
                .collect();
            Sample {
                domain,
                label,
                values,
            }
        })
        .collect();
    MultiDomainDataset::new(fitted, samples, split)
}

enum RawCell {
    Number(f64),
    Text(String),
}

pub fn write_csv<W: Write>(ds: &MultiDomainDataset, writer: W) -> Result<()> {
    let schema = &ds.schema;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![schema.domain_field.clone(), schema.label_field.clone()];
    header.extend(schema.features.iter().map(|f| f.name.clone()));
    w.write_record(&header)?;
    let token = |spec: &super::schema::FeatureSpec, i: u32| -> String {
        spec.vocabulary
            .get(i as usize)
            .cloned()
            .unwrap_or_else(|| OOV_TOKEN.to_string())
    };
    for s in &ds.samples {
        let mut rec = vec![schema.domain_label(s.domain as usize), s.label.to_string()];
        for (spec, v) in schema.features.iter().zip(&s.values) {
            rec.push(match v {
                FeatureValue::Categorical(i) => token(spec, *i),
                FeatureValue::Numerical { raw, .. } => format!("{raw}"),
                FeatureValue::Sequence(t) => t
                    .iter()
                    .map(|&i| token(spec, i))
                    .collect::<Vec<_>>()
                    .join(&SEQ_SEPARATOR.to_string()),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &MultiDomainDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::FeatureSpec;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            2,
            vec![
                FeatureSpec::categorical(
                    "site_id",
                    vec!["a0".into(), "a1".into(), "a2".into(), "a12".into()],
                ),
                FeatureSpec::sequential("hist", vec!["x".into(), "y".into()]),
                FeatureSpec::numerical("price", vec![0.0, 1.0, 2.0]),
            ],
        )
        .unwrap()
    }

    fn parse(text: &str) -> Result<MultiDomainDataset> {
        read_csv(text.as_bytes(), &schema(), Split::Test)
    }

    #[test]
    fn direct_encoding() {
        let ds = parse("domain,label,site_id,hist,price\n0,1,a12,x|y|zz,1.0\n1,0,nope,,5\n").unwrap();
        let s = &ds.samples[0];
        assert_eq!((s.domain, s.label), (0, 1));
        assert_eq!(s.values[0], FeatureValue::Categorical(3));
        assert_eq!(s.values[1], FeatureValue::Sequence(vec![0, 1, 2]));
        assert_eq!(s.values[2], FeatureValue::Numerical { bin: 0, raw: 1.0 });
        let t = &ds.samples[1];
        assert_eq!(t.values[0], FeatureValue::Categorical(4));
        assert_eq!(t.values[1], FeatureValue::Sequence(vec![]));
        assert_eq!(t.values[2], FeatureValue::Numerical { bin: 1, raw: 5.0 });
    }

    #[test]
    fn error_paths() {
        let missing = parse("domain,label,site_id,hist\n0,1,a0,,\n").unwrap_err();
        assert!(matches!(&missing, Error::Schema(m) if m.contains("price")), "{missing}");

        let nonnum = parse("domain,label,site_id,hist,price\n0,1,a0,,1\n0,0,a0,,abc\n").unwrap_err();
        assert!(matches!(nonnum, Error::Parse { row: 2, .. }), "{nonnum}");

        let label = parse("domain,label,site_id,hist,price\n0,2,a0,,1\n").unwrap_err();
        assert!(matches!(label, Error::Value(_)));
    }

    #[test]
    fn truncates_long_sequences() {
        let mut sch = schema();
        sch.max_seq_len = 2;
        let ds = read_csv(
            "domain,label,site_id,hist,price\n0,1,a0,x|y|x|y,1\n".as_bytes(),
            &sch,
            Split::Test,
        )
        .unwrap();
        assert_eq!(ds.samples[0].values[1], FeatureValue::Sequence(vec![0, 1]));
    }

    #[test]
    fn fits_missing_edges_and_string_domains() {
        let mut sch = schema();
        sch.features[2] = FeatureSpec::numerical_unfitted("price", 2);
        sch.domains = vec!["search".into(), "feed".into()];
        let text = "domain,label,site_id,hist,price\nsearch,1,a0,,1\nfeed,0,a0,,2\nsearch,0,a1,,3\nfeed,1,a1,,4\n";
        let ds = read_csv(text.as_bytes(), &sch, Split::Train).unwrap();
        assert!(ds.schema.is_fitted());
        assert_eq!(ds.schema.features[2].num_bins, Some(2));
        assert_eq!(ds.domain_counts(), vec![2, 2]);
        let bins: Vec<u32> = ds
            .samples
            .iter()
            .map(|s| match s.values[2] {
                FeatureValue::Numerical { bin, .. } => bin,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(bins, vec![0, 0, 1, 1]);
    }

    #[test]
    fn round_trip_preserves_encoding() {
        let ds = parse("domain,label,site_id,hist,price\n0,1,a12,x|y|q,1.5\n1,0,zz,,0.25\n1,1,a1,y,-3\n").unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &ds.schema, Split::Test).unwrap();
        assert_eq!(back.samples, ds.samples);
    }
}
