//! Formal explanations for random forest classifiers.
//!
//! A forest is compiled into propositional clauses over an abstraction of
//! the feature space (one variable per binary feature, per categorical
//! value and per threshold interval). The instance's feature values become
//! assumption literals, and abductive explanations (AXps) and contrastive
//! explanations (CXps) are extracted as minimal unsatisfiable subsets and
//! minimal correction subsets of those literals with an incremental SAT
//! oracle.
//!
//! ```
//! use rfxp::model::{heart_disease_forest, Instance, Value};
//! use rfxp::explain::{Explainer, ExplainOptions};
//!
//! let forest = heart_disease_forest();
//! let v = Instance::new(
//!     forest.features(),
//!     vec![Value::Binary(true), Value::Binary(false), Value::Binary(true), Value::Ordinal(70.0)],
//! )
//! .unwrap();
//! let mut explainer = Explainer::new(&forest, &v, &ExplainOptions::default()).unwrap();
//! let axp = explainer.extract_axp().unwrap();
//! assert_eq!(axp.feature_names(&forest), vec!["blocked-arteries", "chest-pain"]);
//! ```

pub mod abstraction;
pub mod cnf;
pub mod encoder;
pub mod explain;
pub mod model;
pub mod model_io;
pub mod oracle;
pub mod verify;

pub use abstraction::Abstraction;
pub use encoder::{encode, CnfEncoding, EncoderOptions};
pub use explain::{Explainer, Explanation, ExplanationKind};
pub use model::{Forest, Instance, Value};
