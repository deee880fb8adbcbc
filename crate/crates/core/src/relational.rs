//! Schemas, tuples and instances with the endogenous/exogenous partition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Position, Result};

/// A relation symbol with its attribute names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub attributes: Vec<String>,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn column(&self, attribute: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == attribute)
    }
}

/// Relation symbols plus the finite universe of constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    predicates: IndexMap<String, Predicate>,
    universe: BTreeSet<String>,
    universe_declared: bool,
}

impl Schema {
    /// `universe = None` means "use the active domain of the instance".
    pub fn new(predicates: Vec<Predicate>, universe: Option<BTreeSet<String>>) -> Result<Self> {
        let mut map = IndexMap::new();
        for p in predicates {
            if p.attributes.is_empty() {
                return Err(Error::ArityMismatch {
                    predicate: p.name,
                    expected: 1,
                    found: 0,
                });
            }
            if map.contains_key(&p.name) {
                return Err(Error::DuplicatePredicate(p.name));
            }
            map.insert(p.name.clone(), p);
        }
        let universe_declared = universe.is_some();
        Ok(Schema {
            predicates: map,
            universe: universe.unwrap_or_default(),
            universe_declared,
        })
    }

    /// Parses the declaration format: one `R(attr1, attr2)` per line, an
    /// optional `UNIVERSE a, b, c` line, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut predicates = Vec::new();
        let mut universe: Option<BTreeSet<String>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |column: usize, message: String| Error::Syntax {
                position: Position {
                    line: lineno + 1,
                    column,
                },
                message,
            };
            if let Some(rest) = line.strip_prefix("UNIVERSE") {
                let set = universe.get_or_insert_with(BTreeSet::new);
                for c in split_constants(rest) {
                    set.insert(c);
                }
                if set.is_empty() {
                    return Err(at(1, "empty UNIVERSE declaration".into()));
                }
                continue;
            }
            let (name, args) = split_atom(line)
                .ok_or_else(|| at(1, format!("expected `R(attr, ...)`, found `{line}`")))?;
            if !is_identifier(name) {
                return Err(at(1, format!("invalid relation name `{name}`")));
            }
            let attributes: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            if attributes.iter().any(|a| !is_identifier(a)) {
                return Err(at(name.len() + 2, "invalid attribute name".into()));
            }
            predicates.push(Predicate {
                name: name.to_string(),
                attributes,
            });
        }
        Schema::new(predicates, universe)
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.get(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values()
    }

    pub fn universe(&self) -> &BTreeSet<String> {
        &self.universe
    }

    pub fn universe_declared(&self) -> bool {
        self.universe_declared
    }

    fn check(&self, tuple: &Tuple) -> Result<()> {
        let p = self
            .predicate(&tuple.predicate)
            .ok_or_else(|| Error::UnknownRelation(tuple.predicate.clone()))?;
        if p.arity() != tuple.args.len() {
            return Err(Error::ArityMismatch {
                predicate: p.name.clone(),
                expected: p.arity(),
                found: tuple.args.len(),
            });
        }
        if self.universe_declared {
            if let Some(c) = tuple.args.iter().find(|c| !self.universe.contains(*c)) {
                return Err(Error::ConstantOutsideUniverse(c.clone()));
            }
        }
        Ok(())
    }
}

/// A ground atom `R(c1, ..., cn)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Tuple {
    pub fn new<P: Into<String>, S: AsRef<str>>(predicate: P, args: &[S]) -> Self {
        Tuple {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    /// Parses `R(a,b)`; constants may be single-quoted.
    pub fn parse(text: &str) -> Option<Self> {
        let (name, args) = split_atom(text.trim())?;
        if !is_identifier(name) || args.is_empty() {
            return None;
        }
        Some(Tuple {
            predicate: name.to_string(),
            args,
        })
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if needs_quotes(a) {
                write!(f, "'{a}'")?;
            } else {
                f.write_str(a)?;
            }
        }
        f.write_str(")")
    }
}

fn needs_quotes(c: &str) -> bool {
    c.is_empty()
        || c.chars()
            .any(|ch| ch.is_whitespace() || matches!(ch, ',' | '(' | ')' | '\'' | '&' | '|' | '!'))
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// Splits `name(a, b)` into the name and trimmed, unquoted arguments.
fn split_atom(text: &str) -> Option<(&str, Vec<String>)> {
    let open = text.find('(')?;
    let inner = text[open + 1..].strip_suffix(')')?;
    let name = text[..open].trim();
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        split_constants(inner)
    };
    Some((name, args))
}

fn split_constants(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut was_quoted = false;
    for ch in text.chars() {
        match ch {
            '\'' => {
                quoted = !quoted;
                was_quoted = true;
            }
            ',' if !quoted => {
                out.push(current.trim().to_string());
                current.clear();
                was_quoted = false;
            }
            _ => current.push(ch),
        }
    }
    if !current.trim().is_empty() || was_quoted {
        out.push(current.trim().to_string());
    }
    out
}

/// A total or partial truth assignment over tuple variables.
pub type Assignment = BTreeMap<Tuple, bool>;

/// An immutable instance `D = D^n ∪ D^x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    schema: Arc<Schema>,
    endogenous: BTreeSet<Tuple>,
    exogenous: BTreeSet<Tuple>,
}

impl Instance {
    /// Validates every tuple against the schema. When the schema declares no
    /// universe, the universe becomes the active domain of the given tuples.
    pub fn new(
        schema: Schema,
        endogenous: BTreeSet<Tuple>,
        exogenous: BTreeSet<Tuple>,
    ) -> Result<Self> {
        for t in endogenous.iter().chain(&exogenous) {
            schema.check(t)?;
        }
        let endogenous: BTreeSet<Tuple> = endogenous.difference(&exogenous).cloned().collect();
        let mut schema = schema;
        if !schema.universe_declared {
            schema.universe = endogenous
                .iter()
                .chain(&exogenous)
                .flat_map(|t| t.args.iter().cloned())
                .collect();
        }
        Ok(Instance {
            schema: Arc::new(schema),
            endogenous,
            exogenous,
        })
    }

    /// All tuples endogenous.
    pub fn endogenous_only(
        schema: Schema,
        tuples: impl IntoIterator<Item = Tuple>,
    ) -> Result<Self> {
        Instance::new(schema, tuples.into_iter().collect(), BTreeSet::new())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn universe(&self) -> &BTreeSet<String> {
        self.schema.universe()
    }

    pub fn endogenous(&self) -> &BTreeSet<Tuple> {
        &self.endogenous
    }

    pub fn exogenous(&self) -> &BTreeSet<Tuple> {
        &self.exogenous
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.endogenous.contains(t) || self.exogenous.contains(t)
    }

    pub fn is_exogenous(&self, t: &Tuple) -> bool {
        self.exogenous.contains(t)
    }

    pub fn len(&self) -> usize {
        self.endogenous.len() + self.exogenous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All tuples of `D`, in tuple order.
    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> {
        let mut all: Vec<&Tuple> = self.endogenous.iter().chain(&self.exogenous).collect();
        all.sort();
        all.into_iter()
    }

    pub fn relation<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Tuple> + 'a {
        self.tuples().filter(move |t| t.predicate == name)
    }

    /// The instance-induced assignment `σ_D` restricted to `vars`.
    pub fn assignment<'a>(&self, vars: impl IntoIterator<Item = &'a Tuple>) -> Assignment {
        vars.into_iter()
            .map(|t| (t.clone(), self.contains(t)))
            .collect()
    }

    /// Returns a copy with the given tuples removed (partition labels kept).
    pub fn without<'a>(&self, removed: impl IntoIterator<Item = &'a Tuple>) -> Instance {
        let removed: BTreeSet<&Tuple> = removed.into_iter().collect();
        Instance {
            schema: Arc::clone(&self.schema),
            endogenous: self
                .endogenous
                .iter()
                .filter(|t| !removed.contains(t))
                .cloned()
                .collect(),
            exogenous: self
                .exogenous
                .iter()
                .filter(|t| !removed.contains(t))
                .cloned()
                .collect(),
        }
    }
}

/// `Adom(D)`: the constants occurring in some tuple of `D`.
pub fn active_domain(inst: &Instance) -> BTreeSet<String> {
    inst.tuples().flat_map(|t| t.args.iter().cloned()).collect()
}

/// The instance an intervention produces: each tuple of `vars` is present
/// iff `sigma` maps it to true; all other tuples keep their state in `D`.
/// Inserted tuples are endogenous.
pub fn materialize_world<'a>(
    inst: &Instance,
    sigma: &Assignment,
    vars: impl IntoIterator<Item = &'a Tuple>,
) -> Result<Instance> {
    let mut endogenous = inst.endogenous.clone();
    let mut exogenous = inst.exogenous.clone();
    for v in vars {
        let present = *sigma
            .get(v)
            .ok_or_else(|| Error::MissingAssignment(v.clone()))?;
        if present {
            if !exogenous.contains(v) {
                endogenous.insert(v.clone());
            }
        } else {
            endogenous.remove(v);
            exogenous.remove(v);
        }
    }
    Ok(Instance {
        schema: Arc::clone(&inst.schema),
        endogenous,
        exogenous,
    })
}

/// Loads an instance from a schema declaration, a directory holding one
/// `<relation>.csv` per declared relation, and an optional partition text
/// listing exogenous tuples.
pub fn load_instance(
    schema_decl: &str,
    data_dir: &Path,
    partition_text: Option<&str>,
) -> Result<Instance> {
    let schema = Schema::parse(schema_decl)?;
    let mut tuples = BTreeSet::new();
    for p in schema.predicates() {
        let path = data_dir.join(format!("{}.csv", p.name));
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        for t in read_relation_csv(p, &text, &path)? {
            tuples.insert(t);
        }
    }
    let mut exogenous = BTreeSet::new();
    if let Some(text) = partition_text {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let t = Tuple::parse(line).ok_or_else(|| Error::Syntax {
                position: Position {
                    line: lineno + 1,
                    column: 1,
                },
                message: format!("expected a tuple `R(a,b)`, found `{line}`"),
            })?;
            if !tuples.contains(&t) {
                return Err(Error::UnknownPartitionTuple(t));
            }
            exogenous.insert(t);
        }
    }
    Instance::new(schema, tuples, exogenous)
}

/// Reads the schema, data directory and optional partition from disk.
pub fn load_instance_from_paths(
    schema_path: &Path,
    data_dir: &Path,
    partition_path: Option<&Path>,
) -> Result<Instance> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let schema = read(schema_path)?;
    let partition = partition_path.map(read).transpose()?;
    load_instance(&schema, data_dir, partition.as_deref())
}

fn read_relation_csv(p: &Predicate, text: &str, path: &Path) -> Result<Vec<Tuple>> {
    let data_err = |message: String| Error::Data {
        path: path.to_path_buf(),
        message,
    };
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| data_err(e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != p.attributes.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(data_err(format!(
            "header {:?} does not match attributes {:?} of {}",
            names, p.attributes, p.name
        )));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => Error::ArityMismatch {
                predicate: p.name.clone(),
                expected: p.arity(),
                found: *len as usize,
            },
            _ => data_err(e.to_string()),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        out.push(Tuple {
            predicate: p.name.clone(),
            args: record.iter().map(str::to_string).collect(),
        });
    }
    Ok(out)
}
