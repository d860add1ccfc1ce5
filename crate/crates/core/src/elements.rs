//! The set of certified constraint elements together with typed value pools.
//!
//! Every value that appears at a source position of a value type joins that
//! type's pool. Pools are append-only and stamped with a global sequence
//! number, which lets both test evaluation and sampler instantiation visit
//! each new combination of pooled values exactly once.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::FtsError;
use crate::model::{Element, Predicate, Problem, ValueType};
use crate::value::{LazySample, Value};

pub type InstanceId = u32;

struct TestRelation {
    name: Arc<str>,
    arg_types: Vec<usize>,
    test: Predicate,
}

/// Static description of value types and test-backed relations.
pub struct Schema {
    pub types: Vec<ValueType>,
    type_index: HashMap<String, usize>,
    sources: HashMap<(Arc<str>, usize), Vec<usize>>,
    tests: Vec<TestRelation>,
    tests_by_type: Vec<Vec<(usize, usize)>>,
}

impl Schema {
    pub fn new(problem: &Problem) -> Result<Self, FtsError> {
        let types = problem.types.clone();
        let type_index: HashMap<String, usize> = types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), i))
            .collect();
        let mut sources: HashMap<(Arc<str>, usize), Vec<usize>> = HashMap::new();
        for (i, t) in types.iter().enumerate() {
            for (rel, pos) in &t.sources {
                sources
                    .entry((Arc::from(rel.as_str()), *pos))
                    .or_default()
                    .push(i);
            }
        }
        let mut tests = Vec::new();
        let mut tests_by_type = vec![Vec::new(); types.len()];
        for rel in problem.system.relations.values() {
            let Some(test) = &rel.test else { continue };
            let arg_types = rel
                .arg_types
                .iter()
                .map(|n| {
                    type_index
                        .get(n)
                        .copied()
                        .ok_or_else(|| FtsError::UnknownType(n.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let id = tests.len();
            for (pos, ty) in arg_types.iter().enumerate() {
                tests_by_type[*ty].push((id, pos));
            }
            tests.push(TestRelation {
                name: Arc::from(rel.name.as_str()),
                arg_types,
                test: test.clone(),
            });
        }
        Ok(Self {
            types,
            type_index,
            sources,
            tests,
            tests_by_type,
        })
    }

    pub fn type_id(&self, name: &str) -> Result<usize, FtsError> {
        self.type_index
            .get(name)
            .copied()
            .ok_or_else(|| FtsError::UnknownType(name.to_string()))
    }

    pub fn is_test(&self, relation: &str) -> bool {
        self.tests.iter().any(|t| &*t.name == relation)
    }
}

#[derive(Clone, Default)]
struct Pool {
    values: Vec<(Value, u64)>,
    index: HashMap<Value, usize>,
}

/// A pool entry appended at some point; `seq` orders all entries globally.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolEntry {
    pub ty: usize,
    pub index: usize,
    pub seq: u64,
}

#[derive(Clone)]
pub struct ElementStore {
    schema: Arc<Schema>,
    elements: IndexMap<Element, Option<InstanceId>>,
    by_relation: HashMap<Arc<str>, Vec<usize>>,
    pools: Vec<Pool>,
    log: Vec<PoolEntry>,
    next_seq: u64,
    token_producers: HashMap<LazySample, Vec<InstanceId>>,
    test_calls: usize,
}

impl ElementStore {
    pub fn new(schema: Arc<Schema>) -> Self {
        let pools = vec![Pool::default(); schema.types.len()];
        Self {
            schema,
            elements: IndexMap::new(),
            by_relation: HashMap::new(),
            pools,
            log: Vec::new(),
            next_seq: 0,
            token_producers: HashMap::new(),
            test_calls: 0,
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, e: &Element) -> bool {
        self.elements.contains_key(e)
    }

    pub fn producer(&self, e: &Element) -> Option<InstanceId> {
        self.elements.get(e).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Element> {
        self.elements.keys()
    }

    pub fn relation(&self, name: &str) -> impl Iterator<Item = &Element> {
        self.by_relation
            .get(name)
            .into_iter()
            .flatten()
            .map(|i| self.elements.get_index(*i).expect("indexed element").0)
    }

    pub fn token_producers(&self, token: &LazySample) -> &[InstanceId] {
        self.token_producers
            .get(token)
            .map_or(&[], |v| v.as_slice())
    }

    pub fn test_calls(&self) -> usize {
        self.test_calls
    }

    pub fn pool(&self, ty: usize) -> impl Iterator<Item = &Value> {
        self.pools[ty].values.iter().map(|(v, _)| v)
    }

    pub fn pool_len(&self, ty: usize) -> usize {
        self.pools[ty].values.len()
    }

    pub fn log(&self) -> &[PoolEntry] {
        &self.log
    }

    pub fn entry_value(&self, entry: &PoolEntry) -> &Value {
        &self.pools[entry.ty].values[entry.index].0
    }

    /// Insert an element and evaluate tests against any newly pooled
    /// values. Returns whether the element was new.
    pub fn insert(&mut self, element: Element, producer: Option<InstanceId>) -> bool {
        let mut pending = VecDeque::new();
        let fresh = self.insert_one(element, producer, &mut pending);
        while let Some(entry) = pending.pop_front() {
            self.evaluate_tests(entry, &mut pending);
        }
        fresh
    }

    pub fn extend(
        &mut self,
        elements: impl IntoIterator<Item = (Element, Option<InstanceId>)>,
    ) -> usize {
        elements
            .into_iter()
            .filter(|(e, p)| self.insert(e.clone(), *p))
            .count()
    }

    fn insert_one(
        &mut self,
        element: Element,
        producer: Option<InstanceId>,
        pending: &mut VecDeque<PoolEntry>,
    ) -> bool {
        if let Some(p) = producer {
            for v in &element.values {
                if let Some(t) = v.as_lazy() {
                    let list = self.token_producers.entry(t).or_default();
                    if !list.contains(&p) {
                        list.push(p);
                    }
                }
            }
        }
        if self.elements.contains_key(&element) {
            return false;
        }
        for (pos, v) in element.values.iter().enumerate() {
            let key = (element.relation.clone(), pos);
            let Some(types) = self.schema.sources.get(&key) else {
                continue;
            };
            for ty in types.clone() {
                if let Some(entry) = self.add_to_pool(ty, v) {
                    pending.push_back(entry);
                }
            }
        }
        let idx = self.elements.len();
        self.by_relation
            .entry(element.relation.clone())
            .or_default()
            .push(idx);
        self.elements.insert(element, producer);
        true
    }

    fn add_to_pool(&mut self, ty: usize, v: &Value) -> Option<PoolEntry> {
        let pool = &mut self.pools[ty];
        if pool.index.contains_key(v) {
            return None;
        }
        let entry = PoolEntry {
            ty,
            index: pool.values.len(),
            seq: self.next_seq,
        };
        self.next_seq += 1;
        pool.index.insert(v.clone(), entry.index);
        pool.values.push((v.clone(), entry.seq));
        self.log.push(entry);
        Some(entry)
    }

    fn evaluate_tests(&mut self, entry: PoolEntry, pending: &mut VecDeque<PoolEntry>) {
        let schema = self.schema.clone();
        for &(tid, pos) in &schema.tests_by_type[entry.ty] {
            let test = &schema.tests[tid];
            let combos = self.combos_at(&test.arg_types, entry, pos);
            for values in combos {
                let element = Element {
                    relation: test.name.clone(),
                    values,
                };
                if self.elements.contains_key(&element) {
                    continue;
                }
                let holds = if element.has_lazy() {
                    true
                } else {
                    self.test_calls += 1;
                    (test.test)(&element.values)
                };
                if holds {
                    self.insert_one(element, None, pending);
                }
            }
        }
    }

    /// Tuples over `arg_types` whose newest entry is `entry`, placed at
    /// position `pos`. Positions of the same type before `pos` only use
    /// strictly older entries so that each tuple is produced once.
    pub fn combos_at(&self, arg_types: &[usize], entry: PoolEntry, pos: usize) -> Vec<Vec<Value>> {
        let ranges: Vec<usize> = arg_types
            .iter()
            .enumerate()
            .map(|(j, &ty)| {
                if j == pos {
                    1
                } else if ty == entry.ty {
                    if j < pos {
                        entry.index
                    } else {
                        entry.index + 1
                    }
                } else {
                    self.pools[ty]
                        .values
                        .partition_point(|(_, s)| *s < entry.seq)
                }
            })
            .collect();
        if ranges.contains(&0) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; arg_types.len()];
        loop {
            out.push(
                (0..arg_types.len())
                    .map(|j| {
                        let i = if j == pos { entry.index } else { idx[j] };
                        self.pools[arg_types[j]].values[i].0.clone()
                    })
                    .collect(),
            );
            // odometer increment, last position fastest
            let mut j = arg_types.len();
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                if j == pos {
                    continue;
                }
                idx[j] += 1;
                if idx[j] < ranges[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// All tuples over `arg_types` that became available with `entry`.
    pub fn combos_for_entry(&self, arg_types: &[usize], entry: PoolEntry) -> Vec<Vec<Value>> {
        let mut out = Vec::new();
        for (pos, ty) in arg_types.iter().enumerate() {
            if *ty == entry.ty {
                out.extend(self.combos_at(arg_types, entry, pos));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Clause, Relation, TransitionSystem};

    fn problem() -> Problem {
        let mut system = TransitionSystem::default();
        system.add_relation(Relation::tested(
            "Less",
            &["num", "num"],
            Arc::new(|v: &[Value]| v[0].as_real().unwrap()[0] < v[1].as_real().unwrap()[0]),
        ));
        Problem {
            system,
            initial: Clause::new("init", vec![]),
            goal: Clause::new("goal", vec![]),
            initial_elements: vec![],
            types: vec![ValueType::new("num", &[("Num", 0)])],
        }
    }

    fn num(x: f64) -> Element {
        Element::new("Num", vec![Value::scalar(x)])
    }

    #[test]
    fn tests_run_once_per_pair() {
        let mut store = ElementStore::new(Arc::new(Schema::new(&problem()).unwrap()));
        for x in [3.0, 1.0, 2.0] {
            store.insert(num(x), None);
        }
        // 3 values: 9 ordered pairs evaluated, 3 hold
        assert_eq!(store.test_calls(), 9);
        assert_eq!(store.relation("Less").count(), 3);
    }

    #[test]
    fn reinsert_is_idempotent() {
        let mut store = ElementStore::new(Arc::new(Schema::new(&problem()).unwrap()));
        assert!(store.insert(num(1.0), None));
        let n = store.len();
        assert!(!store.insert(num(1.0), None));
        assert_eq!(store.len(), n);
    }

    #[test]
    fn lazy_values_are_optimistic() {
        use crate::value::{LazyOrigin, LazySample};
        let mut store = ElementStore::new(Arc::new(Schema::new(&problem()).unwrap()));
        store.insert(num(1.0), None);
        let lazy = Value::Lazy(LazySample(LazyOrigin::Sampler {
            sampler: 0,
            slot: 0,
        }));
        store.insert(Element::new("Num", vec![lazy.clone()]), Some(7));
        assert!(store.contains(&Element::new(
            "Less",
            vec![lazy.clone(), Value::scalar(1.0)]
        )));
        assert!(store.contains(&Element::new(
            "Less",
            vec![Value::scalar(1.0), lazy.clone()]
        )));
        assert_eq!(store.token_producers(&lazy.as_lazy().unwrap()), &[7]);
        assert_eq!(store.test_calls(), 1);
    }
}
