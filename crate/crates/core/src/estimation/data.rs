use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use super::table::{ObservedDistribution, Source, Table};
use super::EstimationError;
use crate::graph::{MGraph, NodeKind, MISSING};

/// Code used for a missing entry.
pub const MISSING_CODE: u32 = u32::MAX;

/// Per-variable domains, by variable name.
pub type Domains = BTreeMap<String, Vec<String>>;

/// One dataset column, dictionary-encoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub levels: Vec<String>,
    /// Index into `levels`, or [`MISSING_CODE`].
    pub codes: Vec<u32>,
}

impl Column {
    pub fn value(&self, row: usize) -> Option<&str> {
        match self.codes[row] {
            MISSING_CODE => None,
            c => Some(&self.levels[c as usize]),
        }
    }
}

/// Rows of discrete values with missing entries, stored by column.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    columns: Vec<Column>,
    rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Dataset, EstimationError> {
        let rows = columns.first().map_or(0, |c| c.codes.len());
        if let Some(c) = columns.iter().find(|c| c.codes.len() != rows) {
            return Err(EstimationError::Csv(format!(
                "column {} has {} rows, expected {rows}",
                c.name,
                c.codes.len()
            )));
        }
        Ok(Dataset { columns, rows })
    }

    /// Builds a dataset from string rows; `na` marks missing entries.
    pub fn from_rows<S: AsRef<str>>(
        header: &[S],
        rows: &[Vec<S>],
        na: &str,
    ) -> Result<Dataset, EstimationError> {
        let mut cols: Vec<(Column, HashMap<String, u32>)> = header
            .iter()
            .map(|h| {
                (
                    Column {
                        name: h.as_ref().to_string(),
                        levels: Vec::new(),
                        codes: Vec::with_capacity(rows.len()),
                    },
                    HashMap::new(),
                )
            })
            .collect();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(EstimationError::Csv(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            for ((col, index), v) in cols.iter_mut().zip(row) {
                let v = v.as_ref();
                let code = if v == na {
                    MISSING_CODE
                } else {
                    *index.entry(v.to_string()).or_insert_with(|| {
                        col.levels.push(v.to_string());
                        (col.levels.len() - 1) as u32
                    })
                };
                col.codes.push(code);
            }
        }
        Dataset::new(cols.into_iter().map(|(c, _)| c).collect())
    }

    pub fn read_csv<R: Read>(reader: R, na: &str) -> Result<Dataset, EstimationError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| EstimationError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| EstimationError::Csv(e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        Dataset::from_rows(&header, &rows, na)
    }

    pub fn write_csv<W: Write>(&self, writer: W, na: &str) -> Result<(), EstimationError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| EstimationError::Csv(e.to_string());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(err)?;
        for r in 0..self.rows {
            w.write_record(self.columns.iter().map(|c| c.value(r).unwrap_or(na)))
                .map_err(err)?;
        }
        w.flush().map_err(|e| EstimationError::Csv(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Values of row `i`, `None` for missing entries.
    pub fn row(&self, i: usize) -> Vec<Option<&str>> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }
}

/// Observed-data columns of `g` in node order: fully observed variables,
/// mechanisms and proxies.
pub fn observed_columns(g: &MGraph) -> Vec<String> {
    g.nodes()
        .iter()
        .filter(|n| {
            matches!(
                n.kind,
                NodeKind::FullyObserved | NodeKind::Mechanism | NodeKind::Proxy
            )
        })
        .map(|n| n.name.clone())
        .collect()
}

/// Relative frequencies of the observed-data configurations in `d`.
/// Partially observed variables are read from their own column (missing
/// entries become `R_X = 1`). Undeclared domains are the sorted set of
/// values present.
pub fn empirical_distribution(
    d: &Dataset,
    g: &MGraph,
    domains: Option<&Domains>,
) -> Result<ObservedDistribution, EstimationError> {
    if d.is_empty() {
        return Err(EstimationError::EmptyDataset);
    }
    let substantive: Vec<String> = g.observed().into_iter().chain(g.partial()).collect();
    let mut base: HashMap<String, (Vec<String>, Vec<u32>)> = HashMap::new();
    for v in &substantive {
        let col = d
            .column(v)
            .ok_or_else(|| EstimationError::MissingColumn(v.clone()))?;
        let partial = g.is_partial(v);
        if !partial {
            if let Some(r) = col.codes.iter().position(|&c| c == MISSING_CODE) {
                return Err(EstimationError::DomainMismatch {
                    column: v.clone(),
                    detail: format!("missing entry in row {} of a fully observed column", r + 1),
                });
            }
        }
        let present: BTreeSet<u32> = col
            .codes
            .iter()
            .copied()
            .filter(|&c| c != MISSING_CODE)
            .collect();
        let domain: Vec<String> = match domains.and_then(|m| m.get(v)) {
            Some(dom) => dom.clone(),
            None => {
                let mut dom: Vec<String> = present
                    .iter()
                    .map(|&c| col.levels[c as usize].clone())
                    .collect();
                dom.sort();
                dom
            }
        };
        if domain.iter().any(|x| x == MISSING) {
            return Err(EstimationError::DomainMismatch {
                column: v.clone(),
                detail: format!("domain contains the reserved marker {MISSING}"),
            });
        }
        let mut remap = vec![MISSING_CODE; col.levels.len()];
        for &c in &present {
            let lvl = &col.levels[c as usize];
            remap[c as usize] = domain.iter().position(|x| x == lvl).ok_or_else(|| {
                EstimationError::DomainMismatch {
                    column: v.clone(),
                    detail: format!("value {lvl} outside the declared domain"),
                }
            })? as u32;
        }
        base.insert(v.clone(), (domain, remap));
    }

    let columns = observed_columns(g);
    let mut doms = Vec::new();
    // For each output column: (dataset column, how to read it).
    enum Read<'a> {
        Value(&'a Column, &'a [u32]),
        Proxy(&'a Column, &'a [u32], u32),
        Mechanism(&'a Column),
    }
    let mut readers = Vec::new();
    for c in &columns {
        let id = g.id(c).unwrap();
        match g.kind(id) {
            NodeKind::FullyObserved => {
                let (dom, remap) = &base[c];
                doms.push(dom.clone());
                readers.push(Read::Value(d.column(c).unwrap(), remap));
            }
            NodeKind::Proxy => {
                let owner = g.owner_of(c).unwrap();
                let (dom, remap) = &base[&owner];
                let mut pd = dom.clone();
                pd.push(MISSING.to_string());
                doms.push(pd);
                readers.push(Read::Proxy(
                    d.column(&owner).unwrap(),
                    remap,
                    dom.len() as u32,
                ));
            }
            NodeKind::Mechanism => {
                let owner = g.owner_of(c).unwrap();
                doms.push(vec!["0".to_string(), "1".to_string()]);
                readers.push(Read::Mechanism(d.column(&owner).unwrap()));
            }
            _ => unreachable!(),
        }
    }
    let mut table = Table::zeros(columns, doms);
    let sizes: Vec<usize> = table.domains().iter().map(|d| d.len()).collect();
    let inc = 1.0 / d.len() as f64;
    for r in 0..d.len() {
        let mut idx = 0usize;
        for (reader, size) in readers.iter().zip(&sizes) {
            let v = match reader {
                Read::Value(col, remap) => remap[col.codes[r] as usize],
                Read::Proxy(col, remap, na) => match col.codes[r] {
                    MISSING_CODE => *na,
                    c => remap[c as usize],
                },
                Read::Mechanism(col) => u32::from(col.codes[r] == MISSING_CODE),
            };
            idx = idx * size + v as usize;
        }
        table.probs_mut()[idx] += inc;
    }
    Ok(ObservedDistribution {
        table,
        source: Source::Empirical { n: d.len() as u64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn table1() -> Dataset {
        // Age group, gender, obesity with missing entries.
        let rows: Vec<Vec<&str>> = vec![
            vec!["16-18", "M", "Y"],
            vec!["16-18", "F", "NA"],
            vec!["13-15", "M", "N"],
            vec!["10-13", "F", "Y"],
            vec!["10-13", "M", "NA"],
            vec!["13-15", "F", "NA"],
            vec!["16-18", "F", "N"],
        ];
        Dataset::from_rows(&["A", "G", "O"], &rows, "NA").unwrap()
    }

    #[test]
    fn seven_rows() {
        let p = empirical_distribution(&table1(), &catalog::obesity_mar(), None).unwrap();
        assert_eq!(p.source, Source::Empirical { n: 7 });
        assert_eq!(p.table.vars(), &["A", "G", "R_O", "O*"]);
        let cell = p
            .table
            .get(&[("A", "13-15"), ("G", "F"), ("R_O", "1"), ("O*", "NA")])
            .unwrap();
        assert!((cell - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(
            p.table
                .get(&[("A", "13-15"), ("G", "F"), ("R_O", "0"), ("O*", "NA")]),
            Some(0.0)
        );
        assert!((p.table.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_row_is_point_mass() {
        let d = Dataset::from_rows(&["A", "G", "O"], &[vec!["1", "0", "1"]], "NA").unwrap();
        let p = empirical_distribution(&d, &catalog::obesity_mar(), None).unwrap();
        assert_eq!(p.table.probs().iter().filter(|&&x| x == 1.0).count(), 1);
    }

    #[test]
    fn missing_in_observed_column() {
        let d = Dataset::from_rows(&["A", "G", "O"], &[vec!["NA", "0", "1"]], "NA").unwrap();
        assert!(matches!(
            empirical_distribution(&d, &catalog::obesity_mar(), None),
            Err(EstimationError::DomainMismatch { .. })
        ));
        assert_eq!(
            empirical_distribution(&Dataset::default(), &catalog::obesity_mar(), None),
            Err(EstimationError::EmptyDataset)
        );
    }

    #[test]
    fn csv_round_trip() {
        let d = table1();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, ".").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("A,G,O\n16-18,M,Y\n16-18,F,.\n"));
        let back = Dataset::read_csv(buf.as_slice(), ".").unwrap();
        assert_eq!(back, d);
    }
}
