use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IrtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemSet {
    Knowledge,
    Reasoning,
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemSet::Knowledge => "knowledge",
            ItemSet::Reasoning => "reasoning",
        })
    }
}

impl FromStr for ItemSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "knowledge" => Ok(ItemSet::Knowledge),
            "reasoning" => Ok(ItemSet::Reasoning),
            other => Err(format!("unknown item set `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub set: ItemSet,
}

/// Respondent × item binary outcomes; `None` marks a missing response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    /// (model, environment) per respondent.
    pub respondents: Vec<(String, String)>,
    pub items: Vec<Item>,
    pub y: Vec<Vec<Option<bool>>>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    respondent_model: String,
    respondent_environment: String,
    item_id: String,
    item_set: String,
    outcome: String,
}

impl ResponseMatrix {
    pub fn new(
        respondents: Vec<(String, String)>,
        items: Vec<Item>,
        y: Vec<Vec<Option<bool>>>,
    ) -> Result<Self, IrtError> {
        let m = Self {
            respondents,
            items,
            y,
        };
        m.check_shape()?;
        Ok(m)
    }

    fn check_shape(&self) -> Result<(), IrtError> {
        if self.y.len() != self.respondents.len() {
            return Err(IrtError::Data(format!(
                "{} outcome rows for {} respondents",
                self.y.len(),
                self.respondents.len()
            )));
        }
        if let Some((j, row)) = self
            .y
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.items.len())
        {
            return Err(IrtError::Data(format!(
                "respondent {j} has {} outcomes for {} items",
                row.len(),
                self.items.len()
            )));
        }
        let unique: BTreeSet<_> = self.respondents.iter().collect();
        if unique.len() != self.respondents.len() {
            return Err(IrtError::Data("duplicate respondent".into()));
        }
        Ok(())
    }

    /// Reads long-format rows
    /// `respondent_model,respondent_environment,item_id,item_set,outcome`.
    /// An empty outcome, `NA` or `missing` leaves the cell missing.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, IrtError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut respondents: Vec<(String, String)> = Vec::new();
        let mut r_index: HashMap<(String, String), usize> = HashMap::new();
        let mut items: Vec<Item> = Vec::new();
        let mut i_index: HashMap<String, usize> = HashMap::new();
        let mut cells: BTreeMap<(usize, usize), Option<bool>> = BTreeMap::new();
        for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let line = line + 2;
            let set: ItemSet = row
                .item_set
                .parse()
                .map_err(|e| IrtError::Data(format!("line {line}: {e}")))?;
            let outcome = match row.outcome.as_str() {
                "1" | "true" => Some(true),
                "0" | "false" => Some(false),
                "" | "NA" | "missing" => None,
                other => {
                    return Err(IrtError::Data(format!(
                        "line {line}: outcome `{other}` is not 0 or 1"
                    )))
                }
            };
            let key = (row.respondent_model, row.respondent_environment);
            let j = *r_index.entry(key.clone()).or_insert_with(|| {
                respondents.push(key);
                respondents.len() - 1
            });
            let i = match i_index.get(&row.item_id) {
                Some(&i) => {
                    if items[i].set != set {
                        return Err(IrtError::Data(format!(
                            "line {line}: item `{}` listed under two item sets",
                            row.item_id
                        )));
                    }
                    i
                }
                None => {
                    items.push(Item {
                        id: row.item_id.clone(),
                        set,
                    });
                    i_index.insert(row.item_id, items.len() - 1);
                    items.len() - 1
                }
            };
            if cells.insert((j, i), outcome).is_some() {
                return Err(IrtError::Data(format!(
                    "line {line}: duplicate response for item `{}`",
                    items[i].id
                )));
            }
        }
        let mut y = vec![vec![None; items.len()]; respondents.len()];
        for ((j, i), v) in cells {
            y[j][i] = v;
        }
        Self::new(respondents, items, y)
    }

    pub fn item_sets(&self) -> BTreeSet<ItemSet> {
        self.items.iter().map(|i| i.set).collect()
    }

    /// Restriction to one item set, keeping respondents with at least one
    /// observed response in it.
    pub fn subset(&self, set: ItemSet) -> ResponseMatrix {
        let cols: Vec<usize> = (0..self.items.len())
            .filter(|&i| self.items[i].set == set)
            .collect();
        let mut respondents = Vec::new();
        let mut y = Vec::new();
        for (j, row) in self.y.iter().enumerate() {
            let sub: Vec<Option<bool>> = cols.iter().map(|&i| row[i]).collect();
            if sub.iter().any(Option::is_some) {
                respondents.push(self.respondents[j].clone());
                y.push(sub);
            }
        }
        ResponseMatrix {
            respondents,
            items: cols.iter().map(|&i| self.items[i].clone()).collect(),
            y,
        }
    }

    /// Distinct model names in first-seen order, and each respondent's index
    /// into it.
    pub(crate) fn model_index(&self) -> (Vec<String>, Vec<usize>) {
        factor(self.respondents.iter().map(|r| r.0.as_str()))
    }

    pub(crate) fn environment_index(&self) -> (Vec<String>, Vec<usize>) {
        factor(self.respondents.iter().map(|r| r.1.as_str()))
    }

    pub fn observed(&self) -> usize {
        self.y.iter().flatten().filter(|v| v.is_some()).count()
    }
}

fn factor<'a>(values: impl Iterator<Item = &'a str>) -> (Vec<String>, Vec<usize>) {
    let mut levels: Vec<String> = Vec::new();
    let mut idx = Vec::new();
    for v in values {
        let k = match levels.iter().position(|l| l == v) {
            Some(k) => k,
            None => {
                levels.push(v.to_string());
                levels.len() - 1
            }
        };
        idx.push(k);
    }
    (levels, idx)
}
