//! Dataset loading and preprocessing.
//!
//! Nominal features are encoded ordinally (category index in schema order)
//! so each feature occupies exactly one network input. Labels are encoded
//! by their position in the class list.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Nominal { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    pub protected: bool,
}

impl FeatureMeta {
    pub fn numeric(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Numeric,
            protected: false,
        }
    }

    pub fn nominal(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Nominal {
                categories: categories.iter().map(|c| c.to_string()).collect(),
            },
            protected: false,
        }
    }

    pub fn protected(mut self) -> Self {
        self.protected = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if let FeatureKind::Nominal { categories } = &self.kind {
            if categories.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "nominal feature '{}' has no categories",
                    self.name
                )));
            }
            let unique: BTreeSet<&String> = categories.iter().collect();
            if unique.len() != categories.len() {
                return Err(Error::InvalidArgument(format!(
                    "nominal feature '{}' has duplicate categories",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn encode(&self, raw: &str, row: usize) -> Result<f64> {
        let record_err = |message: String| Error::DataRecord {
            row,
            column: self.name.clone(),
            message,
        };
        let raw = raw.trim();
        if raw.is_empty() || raw == "?" || raw.eq_ignore_ascii_case("na") {
            return Err(record_err("missing value".into()));
        }
        match &self.kind {
            FeatureKind::Numeric => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| record_err(format!("'{raw}' is not a number")))?;
                if !v.is_finite() {
                    return Err(record_err(format!("'{raw}' is not finite")));
                }
                Ok(v)
            }
            FeatureKind::Nominal { categories } => categories
                .iter()
                .position(|c| c == raw)
                .map(|i| i as f64)
                .ok_or_else(|| record_err(format!("unknown category '{raw}'"))),
        }
    }
}

/// Per-feature min/max fitted on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Self {
        let n = data.n_features();
        let mut mins = vec![f64::INFINITY; n];
        let mut maxs = vec![f64::NEG_INFINITY; n];
        for row in data.instances.row_iter() {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Self { mins, maxs }
    }

    /// Features whose fitted range is empty; they scale to 0.
    pub fn constant_features(&self) -> Vec<usize> {
        (0..self.mins.len()).filter(|&j| self.is_constant(j)).collect()
    }

    fn is_constant(&self, j: usize) -> bool {
        self.maxs[j] <= self.mins[j]
    }

    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        if self.is_constant(j) {
            0.0
        } else {
            (v - self.mins[j]) / (self.maxs[j] - self.mins[j])
        }
    }

    pub fn unscale_value(&self, j: usize, v: f64) -> f64 {
        if self.is_constant(j) {
            self.mins[j]
        } else {
            v * (self.maxs[j] - self.mins[j]) + self.mins[j]
        }
    }

    /// Scales `data` with these parameters; the result remembers the scaler.
    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.mins.len() {
            return Err(Error::shape(
                "MinMaxScaler::transform",
                format!("scaler fitted on {} features", self.mins.len()),
                format!("dataset with {}", data.n_features()),
            ));
        }
        let mut out = data.clone();
        let n = data.n_features();
        for (idx, v) in out.instances.as_mut_slice().iter_mut().enumerate() {
            *v = self.scale_value(idx % n, *v);
        }
        out.scaler = Some(self.clone());
        Ok(out)
    }

    pub fn inverse_transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.mins.len() {
            return Err(Error::shape(
                "MinMaxScaler::inverse_transform",
                format!("scaler fitted on {} features", self.mins.len()),
                format!("dataset with {}", data.n_features()),
            ));
        }
        let mut out = data.clone();
        let n = data.n_features();
        for (idx, v) in out.instances.as_mut_slice().iter_mut().enumerate() {
            *v = self.unscale_value(idx % n, *v);
        }
        out.scaler = None;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Matrix,
    labels: Vec<usize>,
    meta: Vec<FeatureMeta>,
    class_names: Vec<String>,
    scaler: Option<MinMaxScaler>,
}

impl Dataset {
    pub fn new(
        instances: Matrix,
        labels: Vec<usize>,
        meta: Vec<FeatureMeta>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if meta.len() != instances.cols() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} feature descriptions", meta.len()),
                format!("{} instance columns", instances.cols()),
            ));
        }
        if labels.len() != instances.rows() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} labels", labels.len()),
                format!("{} instances", instances.rows()),
            ));
        }
        if class_names.is_empty() {
            return Err(Error::InvalidArgument("dataset needs class names".into()));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_names.len()) {
            return Err(Error::DataRecord {
                row,
                column: "label".into(),
                message: format!("label {label} outside {} classes", class_names.len()),
            });
        }
        for m in &meta {
            m.validate()?;
        }
        Ok(Self {
            instances,
            labels,
            meta,
            class_names,
            scaler: None,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.rows()
    }

    /// Always false; datasets hold at least one instance.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.instances.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn instances(&self) -> &Matrix {
        &self.instances
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.instances.row(i)
    }

    pub fn instance(&self, i: usize) -> Vector {
        Vector::from_raw(self.row(i).to_vec())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn meta(&self) -> &[FeatureMeta] {
        &self.meta
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.meta.iter().map(|m| m.name.clone()).collect()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Scaler applied to these instances, if any.
    pub fn scaler(&self) -> Option<&MinMaxScaler> {
        self.scaler.as_ref()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.meta.iter().position(|m| m.name == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.instances.column(j)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Per-feature means of the instances.
    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_features()];
        for row in self.instances.row_iter() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums.into_iter().map(|s| s / self.len() as f64).collect()
    }

    /// Instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Data("subset would be empty".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.n_features());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!("instance {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset {
            instances: Matrix::from_raw(indices.len(), self.n_features(), data),
            labels,
            meta: self.meta.clone(),
            class_names: self.class_names.clone(),
            scaler: self.scaler.clone(),
        })
    }

    /// Same labels and metadata with replaced instance values.
    pub fn with_instances(&self, instances: Matrix) -> Result<Dataset> {
        if instances.shape() != self.instances.shape() {
            return Err(Error::shape(
                "Dataset::with_instances",
                format!("{}x{}", self.len(), self.n_features()),
                format!("{}x{}", instances.rows(), instances.cols()),
            ));
        }
        Ok(Dataset {
            instances,
            ..self.clone()
        })
    }

    /// Marks the named features as protected.
    pub fn mark_protected(&mut self, names: &[&str]) -> Result<()> {
        for name in names {
            let j = self
                .feature_index(name)
                .ok_or_else(|| Error::Data(format!("no feature named '{name}'")))?;
            self.meta[j].protected = true;
        }
        Ok(())
    }

    /// Raw (unscaled) value of feature `j` for instance `i`.
    pub fn raw_value(&self, i: usize, j: usize) -> f64 {
        let v = self.instances.get(i, j);
        match &self.scaler {
            Some(s) => s.unscale_value(j, v),
            None => v,
        }
    }
}

/// JSON sidecar describing a generic CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub features: Vec<SchemaFeature>,
    pub label: String,
    /// Class order; defaults to the sorted distinct label values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFeature {
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default)]
    pub protected: bool,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("schema: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn feature_meta(&self) -> Result<Vec<FeatureMeta>> {
        self.features
            .iter()
            .map(|f| {
                let kind = match (f.kind.as_str(), &f.categories) {
                    ("numeric", _) => FeatureKind::Numeric,
                    ("nominal", Some(c)) => FeatureKind::Nominal {
                        categories: c.clone(),
                    },
                    ("nominal", None) => {
                        return Err(Error::Data(format!(
                            "schema: nominal feature '{}' lists no categories",
                            f.name
                        )))
                    }
                    (other, _) => {
                        return Err(Error::Data(format!(
                            "schema: feature '{}' has unknown kind '{other}'",
                            f.name
                        )))
                    }
                };
                let meta = FeatureMeta {
                    name: f.name.clone(),
                    kind,
                    protected: f.protected,
                };
                meta.validate()?;
                Ok(meta)
            })
            .collect()
    }
}

/// Loads a comma-separated file with a header row. Columns are matched to
/// schema features by name; the header must contain exactly the schema's
/// features plus the label column.
pub fn load_csv<R: Read>(source: R, schema: &Schema) -> Result<Dataset> {
    let meta = schema.feature_meta()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.len() != meta.len() + 1 {
        return Err(Error::Data(format!(
            "header has {} columns, schema describes {} features plus the label",
            header.len(),
            meta.len()
        )));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column '{name}' missing from header")))
    };
    let feature_cols = meta
        .iter()
        .map(|m| find(&m.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = find(&schema.label)?;

    let mut data = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::DataRecord {
            row: r + 1,
            column: "*".into(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::DataRecord {
                row: r + 1,
                column: "*".into(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (m, &c) in meta.iter().zip(&feature_cols) {
            data.push(m.encode(&record[c], r + 1)?);
        }
        let label = record[label_col].trim();
        if label.is_empty() {
            return Err(Error::DataRecord {
                row: r + 1,
                column: schema.label.clone(),
                message: "missing label".into(),
            });
        }
        raw_labels.push(label.to_string());
    }
    if raw_labels.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    let class_names = match &schema.classes {
        Some(c) => c.clone(),
        None => raw_labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let labels = raw_labels
        .iter()
        .enumerate()
        .map(|(r, l)| {
            class_names.iter().position(|c| c == l).ok_or_else(|| Error::DataRecord {
                row: r + 1,
                column: schema.label.clone(),
                message: format!("unknown class '{l}'"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = labels.len();
    Dataset::new(Matrix::new(rows, meta.len(), data)?, labels, meta, class_names)
}

pub fn load_csv_path(data: impl AsRef<Path>, schema: impl AsRef<Path>) -> Result<Dataset> {
    let schema = Schema::load(schema)?;
    let path = data.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv(std::io::BufReader::new(file), &schema)
}

pub const GERMAN_PERSONAL_STATUS: &str = "personal_status_sex";
pub const GERMAN_GENDER: &str = "gender";
pub const GERMAN_AGE: &str = "age";

/// Attribute layout of the UCI Statlog German Credit file, in column order.
pub fn german_credit_schema() -> Vec<FeatureMeta> {
    vec![
        FeatureMeta::nominal("checking_account", &["A11", "A12", "A13", "A14"]),
        FeatureMeta::numeric("duration_months"),
        FeatureMeta::nominal("credit_history", &["A30", "A31", "A32", "A33", "A34"]),
        FeatureMeta::nominal(
            "purpose",
            &["A40", "A41", "A42", "A43", "A44", "A45", "A46", "A47", "A48", "A49", "A410"],
        ),
        FeatureMeta::numeric("credit_amount"),
        FeatureMeta::nominal("savings_account", &["A61", "A62", "A63", "A64", "A65"]),
        FeatureMeta::nominal("employment_since", &["A71", "A72", "A73", "A74", "A75"]),
        FeatureMeta::numeric("installment_rate"),
        FeatureMeta::nominal(GERMAN_PERSONAL_STATUS, &["A91", "A92", "A93", "A94", "A95"]),
        FeatureMeta::nominal("other_debtors", &["A101", "A102", "A103"]),
        FeatureMeta::numeric("residence_since"),
        FeatureMeta::nominal("property", &["A121", "A122", "A123", "A124"]),
        FeatureMeta::numeric(GERMAN_AGE).protected(),
        FeatureMeta::nominal("other_installments", &["A141", "A142", "A143"]),
        FeatureMeta::nominal("housing", &["A151", "A152", "A153"]),
        FeatureMeta::numeric("existing_credits"),
        FeatureMeta::nominal("job", &["A171", "A172", "A173", "A174"]),
        FeatureMeta::numeric("people_liable"),
        FeatureMeta::nominal("telephone", &["A191", "A192"]),
        FeatureMeta::nominal("foreign_worker", &["A201", "A202"]),
    ]
}

/// Loads the whitespace-separated UCI German Credit file (20 attributes and
/// a label, 1 = good, 2 = bad). Classes are ordered `["bad", "good"]`.
pub fn load_uci_german<R: Read>(mut source: R) -> Result<Dataset> {
    let meta = german_credit_schema();
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::Data(format!("reading German Credit file: {e}")))?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != meta.len() + 1 {
            return Err(Error::DataRecord {
                row: r + 1,
                column: "*".into(),
                message: format!("expected {} fields, found {}", meta.len() + 1, fields.len()),
            });
        }
        for (m, raw) in meta.iter().zip(&fields) {
            data.push(m.encode(raw, r + 1)?);
        }
        labels.push(match fields[meta.len()] {
            "1" => 1,
            "2" => 0,
            other => {
                return Err(Error::DataRecord {
                    row: r + 1,
                    column: "label".into(),
                    message: format!("expected 1 or 2, found '{other}'"),
                })
            }
        });
    }
    if labels.is_empty() {
        return Err(Error::Data("German Credit file has no rows".into()));
    }
    let rows = labels.len();
    Dataset::new(
        Matrix::new(rows, meta.len(), data)?,
        labels,
        meta,
        vec!["bad".into(), "good".into()],
    )
}

pub fn load_uci_german_path(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_uci_german(std::io::BufReader::new(file))
}

/// Fits a scaler on `data` and applies it.
pub fn minmax_scale(data: &Dataset) -> Result<(Dataset, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(data);
    Ok((scaler.transform(data)?, scaler))
}

/// Replaces the combined sex and marital status attribute with a binary
/// protected `gender` feature: A92/A95 are female (0), A91/A93/A94 male (1).
pub fn recode_german_gender(data: &Dataset) -> Result<Dataset> {
    let j = data
        .feature_index(GERMAN_PERSONAL_STATUS)
        .ok_or_else(|| Error::Data(format!("dataset has no '{GERMAN_PERSONAL_STATUS}' feature")))?;
    let categories = match &data.meta[j].kind {
        FeatureKind::Nominal { categories } => categories.clone(),
        FeatureKind::Numeric => {
            return Err(Error::Data(format!("'{GERMAN_PERSONAL_STATUS}' is not nominal")))
        }
    };
    if data.scaler.is_some() {
        return Err(Error::InvalidArgument(
            "recode the gender attribute before scaling".into(),
        ));
    }
    let mut out = data.clone();
    for i in 0..data.len() {
        let code = &categories[data.instances.get(i, j) as usize];
        let gender = match code.as_str() {
            "A92" | "A95" => 0.0,
            "A91" | "A93" | "A94" => 1.0,
            other => {
                return Err(Error::DataRecord {
                    row: i + 1,
                    column: GERMAN_PERSONAL_STATUS.into(),
                    message: format!("unexpected code '{other}'"),
                })
            }
        };
        out.instances.set(i, j, gender);
    }
    out.meta[j] = FeatureMeta::nominal(GERMAN_GENDER, &["female", "male"]).protected();
    Ok(out)
}

/// Loads German Credit, recodes gender and min-max scales every feature.
pub fn prepare_german_credit(path: impl AsRef<Path>) -> Result<Dataset> {
    let raw = load_uci_german_path(path)?;
    Ok(minmax_scale(&recode_german_gender(&raw)?)?.0)
}

/// Membership masks for the protected groups: female applicants and
/// applicants younger than 25.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProtectedGroups {
    pub female: Vec<bool>,
    pub young: Vec<bool>,
}

pub const YOUNG_AGE_LIMIT: f64 = 25.0;

pub fn protected_groups(data: &Dataset, age: &str, gender: &str) -> Result<ProtectedGroups> {
    let age_j = data
        .feature_index(age)
        .ok_or_else(|| Error::Data(format!("no feature named '{age}'")))?;
    let gender_j = data
        .feature_index(gender)
        .ok_or_else(|| Error::Data(format!("no feature named '{gender}'")))?;
    let female_code = match &data.meta[gender_j].kind {
        FeatureKind::Nominal { categories } => categories
            .iter()
            .position(|c| c == "female")
            .ok_or_else(|| Error::Data(format!("'{gender}' has no 'female' category")))?,
        FeatureKind::Numeric => return Err(Error::Data(format!("'{gender}' is not nominal"))),
    };
    let mut groups = ProtectedGroups {
        female: Vec::with_capacity(data.len()),
        young: Vec::with_capacity(data.len()),
    };
    for i in 0..data.len() {
        let code = data.raw_value(i, gender_j).round() as usize;
        groups.female.push(code == female_code);
        groups.young.push(data.raw_value(i, age_j) < YOUNG_AGE_LIMIT);
    }
    Ok(groups)
}
