//! JSON model files and CSV datasets.
//!
//! Model schema:
//!
//! ```text
//! {"version": 1,
//!  "features": [{"name": "w", "kind": "ordinal"},
//!               {"name": "c", "kind": "categorical", "values": ["a", "b"]}],
//!  "classes": ["No", "Yes"],
//!  "trees": [node, ...]}
//!
//! node = {"feature": 0, "op": "<=", "threshold": 75, "left": node, "right": node}
//!      | {"feature": 1, "op": "in", "values": ["a"], "left": node, "right": node}
//!      | {"leaf": 1}
//! ```
//!
//! Feature and class references are 0-based. Binary features use `"<="`
//! with a threshold in `[0, 1)`. Thresholds may be written as numbers or as
//! decimal strings.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::model::{ClassId, FeatureKind, FeatureSpec, Forest, Instance, ModelError, Node, Split, Tree, Value};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {msg}")]
    Schema { path: String, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

fn schema(path: &str, msg: impl Into<String>) -> LoadError {
    LoadError::Schema { path: if path.is_empty() { "<root>".into() } else { path.into() }, msg: msg.into() }
}

fn read_file(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Forest, LoadError> {
    parse_model(&read_file(path.as_ref())?)
}

pub fn parse_model(text: &str) -> Result<Forest, LoadError> {
    let root: Json = serde_json::from_str(text)?;
    let obj = root.as_object().ok_or_else(|| schema("", "expected an object"))?;
    let version = obj.get("version").and_then(Json::as_u64).ok_or_else(|| schema("version", "missing or not an integer"))?;
    if version != FORMAT_VERSION {
        return Err(schema("version", format!("unsupported version {version}")));
    }
    let features = obj
        .get("features")
        .and_then(Json::as_array)
        .ok_or_else(|| schema("features", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, f)| parse_feature(f, &format!("features[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let classes = obj
        .get("classes")
        .and_then(Json::as_array)
        .ok_or_else(|| schema("classes", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, c)| c.as_str().map(String::from).ok_or_else(|| schema(&format!("classes[{i}]"), "expected a string")))
        .collect::<Result<Vec<_>, _>>()?;
    let trees_json = obj.get("trees").and_then(Json::as_array).ok_or_else(|| schema("trees", "expected an array"))?;
    if trees_json.is_empty() {
        return Err(ModelError::NoTrees.into());
    }
    let mut trees = Vec::with_capacity(trees_json.len());
    for (i, t) in trees_json.iter().enumerate() {
        let path = format!("trees[{i}]");
        let mut nodes = Vec::new();
        parse_node(t, &path, &features, classes.len(), &mut nodes)?;
        trees.push(Tree::from_nodes(nodes).map_err(|msg| schema(&path, msg))?);
    }
    Ok(Forest::new(features, classes, trees)?)
}

fn parse_feature(f: &Json, path: &str) -> Result<FeatureSpec, LoadError> {
    let obj = f.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    let name = obj.get("name").and_then(Json::as_str).ok_or_else(|| schema(&format!("{path}.name"), "expected a string"))?;
    let kind = obj.get("kind").and_then(Json::as_str).ok_or_else(|| schema(&format!("{path}.kind"), "expected a string"))?;
    match kind {
        "binary" => Ok(FeatureSpec::binary(name)),
        "ordinal" => Ok(FeatureSpec::ordinal(name)),
        "categorical" => {
            let vpath = format!("{path}.values");
            let values = obj
                .get("values")
                .and_then(Json::as_array)
                .ok_or_else(|| schema(&vpath, "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, v)| v.as_str().map(String::from).ok_or_else(|| schema(&format!("{vpath}[{i}]"), "expected a string")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(FeatureSpec::categorical(name, values))
        }
        other => Err(schema(&format!("{path}.kind"), format!("unknown kind `{other}`"))),
    }
}

fn parse_threshold(v: Option<&Json>, path: &str) -> Result<f64, LoadError> {
    let t = match v {
        Some(Json::Number(n)) => n.as_f64(),
        Some(Json::String(s)) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    t.filter(|t| t.is_finite()).ok_or_else(|| schema(path, "expected a finite number"))
}

/// Appends the subtree to `nodes` in pre-order and returns its index.
fn parse_node(
    n: &Json,
    path: &str,
    features: &[FeatureSpec],
    num_classes: usize,
    nodes: &mut Vec<Node>,
) -> Result<usize, LoadError> {
    let obj = n.as_object().ok_or_else(|| schema(path, "expected a node object"))?;
    let id = nodes.len();
    if let Some(leaf) = obj.get("leaf") {
        let class = leaf.as_u64().ok_or_else(|| schema(&format!("{path}.leaf"), "expected a class index"))? as usize;
        if class >= num_classes {
            return Err(schema(&format!("{path}.leaf"), format!("class {class} out of range")));
        }
        nodes.push(Node::Leaf { class });
        return Ok(id);
    }
    let feature =
        obj.get("feature").and_then(Json::as_u64).ok_or_else(|| schema(&format!("{path}.feature"), "expected a feature index"))?
            as usize;
    let spec = features
        .get(feature)
        .ok_or_else(|| schema(&format!("{path}.feature"), format!("feature {feature} out of range")))?;
    let op = obj.get("op").and_then(Json::as_str).ok_or_else(|| schema(&format!("{path}.op"), "expected a string"))?;
    let split = match (op, spec.kind) {
        ("<=", FeatureKind::Ordinal) => Split::Threshold(parse_threshold(obj.get("threshold"), &format!("{path}.threshold"))?),
        ("<=", FeatureKind::Binary) => {
            let tpath = format!("{path}.threshold");
            let t = parse_threshold(obj.get("threshold"), &tpath)?;
            if !(0.0..1.0).contains(&t) {
                return Err(schema(&tpath, "binary split threshold must lie in [0, 1)"));
            }
            Split::Binary
        }
        ("in", FeatureKind::Categorical) => {
            let vpath = format!("{path}.values");
            let mut idx = obj
                .get("values")
                .and_then(Json::as_array)
                .ok_or_else(|| schema(&vpath, "expected an array"))?
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_str()
                        .and_then(|s| spec.value_index(s))
                        .ok_or_else(|| schema(&format!("{vpath}[{i}]"), format!("not a value of `{}`", spec.name)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            idx.sort_unstable();
            idx.dedup();
            Split::Subset(idx)
        }
        (op, kind) => {
            return Err(schema(&format!("{path}.op"), format!("`{op}` does not apply to {} feature `{}`", kind.as_str(), spec.name)))
        }
    };
    nodes.push(Node::Leaf { class: 0 });
    let lj = obj.get("left").ok_or_else(|| schema(&format!("{path}.left"), "missing child"))?;
    let rj = obj.get("right").ok_or_else(|| schema(&format!("{path}.right"), "missing child"))?;
    let left = parse_node(lj, &format!("{path}.left"), features, num_classes, nodes)?;
    let right = parse_node(rj, &format!("{path}.right"), features, num_classes, nodes)?;
    nodes[id] = Node::Internal { feature, split, left, right };
    Ok(id)
}

fn emit_node(forest: &Forest, tree: &Tree, id: usize) -> Json {
    match tree.node(id) {
        Node::Leaf { class } => json!({ "leaf": class }),
        Node::Internal { feature, split, left, right } => {
            let mut m = Map::new();
            m.insert("feature".into(), json!(feature));
            match split {
                Split::Binary => {
                    m.insert("op".into(), json!("<="));
                    m.insert("threshold".into(), json!(0.5));
                }
                Split::Threshold(t) => {
                    m.insert("op".into(), json!("<="));
                    m.insert("threshold".into(), json!(t));
                }
                Split::Subset(s) => {
                    let values = &forest.features()[*feature].values;
                    m.insert("op".into(), json!("in"));
                    m.insert("values".into(), json!(s.iter().map(|&i| values[i].as_str()).collect::<Vec<_>>()));
                }
            }
            m.insert("left".into(), emit_node(forest, tree, *left));
            m.insert("right".into(), emit_node(forest, tree, *right));
            Json::Object(m)
        }
    }
}

/// Canonical JSON text: sorted keys, two-space indentation, trailing newline.
pub fn emit_model(forest: &Forest) -> String {
    let features: Vec<Json> = forest
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Categorical => json!({ "name": f.name, "kind": f.kind.as_str(), "values": f.values }),
            _ => json!({ "name": f.name, "kind": f.kind.as_str() }),
        })
        .collect();
    let trees: Vec<Json> = forest.trees().iter().map(|t| emit_node(forest, t, 0)).collect();
    let doc = json!({
        "version": FORMAT_VERSION,
        "features": features,
        "classes": forest.classes(),
        "trees": trees,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn save_model(forest: &Forest, path: impl AsRef<Path>) -> Result<(), LoadError> {
    let path = path.as_ref();
    fs::write(path, emit_model(forest)).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

/// Instances with optional labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub labels: Option<Vec<ClassId>>,
}

pub fn load_dataset(path: impl AsRef<Path>, forest: &Forest) -> Result<Dataset, LoadError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    read_dataset(file, forest)
}

pub fn load_instances(path: impl AsRef<Path>, forest: &Forest) -> Result<Vec<Instance>, LoadError> {
    Ok(load_dataset(path, forest)?.instances)
}

/// Parses a CSV whose header names the features in model order, optionally
/// followed by one label column holding class names.
pub fn read_dataset<R: Read>(reader: R, forest: &Forest) -> Result<Dataset, LoadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Ok(Dataset::default());
    }
    let names: Vec<&str> = forest.features().iter().map(|f| f.name.as_str()).collect();
    let m = names.len();
    let labelled = match header.len() {
        n if n == m => false,
        n if n == m + 1 => true,
        n => return Err(LoadError::Row { row: 0, msg: format!("header has {n} columns, model has {m} features") }),
    };
    for (j, name) in names.iter().enumerate() {
        if &header[j] != *name {
            return Err(LoadError::Row { row: 0, msg: format!("column {} is `{}`, expected `{name}`", j + 1, &header[j]) });
        }
    }
    let mut data = Dataset { instances: Vec::new(), labels: labelled.then(Vec::new) };
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(LoadError::Row { row, msg: format!("expected {} fields, found {}", header.len(), record.len()) });
        }
        let values = forest
            .features()
            .iter()
            .enumerate()
            .map(|(j, spec)| parse_value(spec, &record[j]).map_err(|msg| LoadError::Row { row, msg }))
            .collect::<Result<Vec<_>, _>>()?;
        let instance = Instance::new(forest.features(), values).map_err(|e| LoadError::Row { row, msg: e.to_string() })?;
        data.instances.push(instance);
        if let Some(labels) = &mut data.labels {
            let raw = &record[m];
            let class = forest
                .class_index(raw)
                .ok_or_else(|| LoadError::Row { row, msg: format!("unknown class label `{raw}`") })?;
            labels.push(class);
        }
    }
    Ok(data)
}

fn parse_value(spec: &FeatureSpec, raw: &str) -> Result<Value, String> {
    match spec.kind {
        FeatureKind::Binary => match raw {
            "0" | "0.0" | "false" => Ok(Value::Binary(false)),
            "1" | "1.0" | "true" => Ok(Value::Binary(true)),
            _ => Err(format!("`{raw}` is not a binary value for `{}`", spec.name)),
        },
        FeatureKind::Ordinal => raw
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::Ordinal)
            .ok_or_else(|| format!("`{raw}` is not a finite number for `{}`", spec.name)),
        FeatureKind::Categorical => spec
            .value_index(raw)
            .map(Value::Categorical)
            .ok_or_else(|| format!("`{raw}` is not in the domain of `{}`", spec.name)),
    }
}

/// CSV line for an instance, in the dataset format.
pub fn format_instance(forest: &Forest, instance: &Instance) -> String {
    instance
        .values()
        .iter()
        .zip(forest.features())
        .map(|(v, spec)| match v {
            Value::Categorical(i) => spec.values[*i].clone(),
            other => other.to_string(),
        })
        .collect::<Vec<_>>()
        .join(",")
}
