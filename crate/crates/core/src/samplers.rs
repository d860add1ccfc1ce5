//! Conditional samplers, their instances, and the shared sampling
//! procedures used by both planners.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elements::{ElementStore, InstanceId, Schema};
use crate::error::FtsError;
use crate::model::{Element, Predicate, Problem};
use crate::value::{LazyOrigin, LazySample, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    In(usize),
    Out(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certified {
    pub relation: String,
    pub args: Vec<Slot>,
}

impl Certified {
    pub fn new(relation: &str, args: &[Slot]) -> Self {
        Self {
            relation: relation.to_string(),
            args: args.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Draw {
    Output(Vec<Value>),
    /// The sequence has ended.
    Exhausted,
    /// This draw failed within its effort budget; later draws may succeed.
    Failed,
}

#[derive(Clone, Copy, Debug)]
pub struct DrawContext {
    /// Zero-based index of this draw for the instance.
    pub draw: usize,
    /// Effort budget for randomized generators.
    pub attempts: usize,
}

pub trait Generator: Send {
    fn next(&mut self, ctx: &DrawContext) -> Draw;

    /// True once no further outputs will be produced.
    fn finished(&self) -> bool {
        false
    }
}

pub type Factory = Arc<dyn Fn(&[Value], ChaCha8Rng) -> Box<dyn Generator> + Send + Sync>;

/// Generator backed by a closure.
pub struct FnGenerator<F>(pub F);

impl<F: FnMut(&DrawContext) -> Draw + Send> Generator for FnGenerator<F> {
    fn next(&mut self, ctx: &DrawContext) -> Draw {
        (self.0)(ctx)
    }
}

/// Finite sequence of precomputed outputs.
pub struct Enumerate {
    items: VecDeque<Vec<Value>>,
}

impl Enumerate {
    pub fn new(items: Vec<Vec<Value>>) -> Self {
        Self {
            items: items.into(),
        }
    }
}

impl Generator for Enumerate {
    fn next(&mut self, _: &DrawContext) -> Draw {
        self.items.pop_front().map_or(Draw::Exhausted, Draw::Output)
    }

    fn finished(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone)]
pub struct ConditionalSampler {
    pub name: String,
    /// Value type of each input.
    pub inputs: Vec<String>,
    pub outputs: usize,
    pub certified: Vec<Certified>,
    /// Optional admissibility test on input tuples.
    pub input_filter: Option<Predicate>,
    pub factory: Factory,
}

impl ConditionalSampler {
    pub fn new(
        name: &str,
        inputs: &[&str],
        outputs: usize,
        certified: Vec<Certified>,
        factory: Factory,
    ) -> Self {
        Self {
            name: name.to_string(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs,
            certified,
            input_filter: None,
            factory,
        }
    }

    pub fn with_filter(mut self, filter: Predicate) -> Self {
        self.input_filter = Some(filter);
        self
    }

    fn elements(&self, inputs: &[Value], outputs: &[Value]) -> Vec<Element> {
        self.certified
            .iter()
            .map(|c| {
                let values = c
                    .args
                    .iter()
                    .map(|s| match s {
                        Slot::In(i) => inputs[*i].clone(),
                        Slot::Out(j) => outputs[*j].clone(),
                    })
                    .collect();
                Element::new(&c.relation, values)
            })
            .collect()
    }
}

impl fmt::Debug for ConditionalSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConditionalSampler")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("certified", &self.certified)
            .finish()
    }
}

/// How lazy placeholders are named.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenMode {
    /// One token per (sampler, output).
    PerSampler,
    /// One token per (instance, output).
    #[default]
    PerInstance,
}

pub struct SamplerInstance {
    pub sampler: usize,
    pub inputs: Vec<Value>,
    pub cursor: usize,
    pub exhausted: bool,
    pub failures: usize,
    pub last_output: Option<Vec<Value>>,
    generator: Option<Box<dyn Generator>>,
}

impl SamplerInstance {
    pub fn is_concrete(&self) -> bool {
        !self.inputs.iter().any(Value::is_lazy)
    }
}

/// FNV-1a, used for seeds that must not depend on the standard hasher.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn bytes(&mut self, bs: &[u8]) {
        for b in bs {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    fn value(&mut self, v: &Value) {
        match v {
            Value::Real(xs) => {
                self.bytes(&[1]);
                xs.iter()
                    .for_each(|x| self.bytes(&x.to_bits().to_le_bytes()));
            }
            Value::Sym(s) => {
                self.bytes(&[2]);
                self.bytes(s.as_bytes());
            }
            Value::Bool(b) => self.bytes(&[3, u8::from(*b)]),
            Value::Traj(pts) => {
                self.bytes(&[4]);
                for p in pts.iter() {
                    p.iter()
                        .for_each(|x| self.bytes(&x.to_bits().to_le_bytes()));
                    self.bytes(&[0xff]);
                }
            }
            Value::Lazy(l) => self.bytes(l.to_string().as_bytes()),
        }
        self.bytes(&[0]);
    }
}

pub fn instance_seed(global: u64, sampler: &str, inputs: &[Value]) -> u64 {
    let mut h = Fnv::new();
    h.bytes(&global.to_le_bytes());
    h.bytes(sampler.as_bytes());
    h.bytes(&[0]);
    inputs.iter().for_each(|v| h.value(v));
    h.0
}

/// All samplers of a problem plus every instance created so far.
pub struct InstanceTable {
    samplers: Arc<[ConditionalSampler]>,
    input_types: Vec<Vec<usize>>,
    instances: Vec<SamplerInstance>,
    index: HashMap<(usize, Vec<Value>), InstanceId>,
    seed: u64,
    calls: Vec<usize>,
    tests: HashMap<String, Predicate>,
}

impl InstanceTable {
    pub fn new(
        samplers: Arc<[ConditionalSampler]>,
        schema: &Schema,
        problem: &Problem,
        seed: u64,
    ) -> Result<Self, FtsError> {
        let mut input_types = Vec::new();
        for s in samplers.iter() {
            let tys = s
                .inputs
                .iter()
                .map(|n| schema.type_id(n))
                .collect::<Result<Vec<_>, _>>()?;
            input_types.push(tys);
            for c in &s.certified {
                let rel = problem
                    .system
                    .relations
                    .get(&c.relation)
                    .ok_or_else(|| FtsError::UnknownRelation(c.relation.clone()))?;
                if rel.arity != c.args.len() {
                    return Err(FtsError::InvalidSpec(format!(
                        "sampler {} certifies {} with the wrong arity",
                        s.name, c.relation
                    )));
                }
            }
        }
        let tests = problem
            .system
            .relations
            .values()
            .filter_map(|r| r.test.clone().map(|t| (r.name.clone(), t)))
            .collect();
        Ok(Self {
            calls: vec![0; samplers.len()],
            samplers,
            input_types,
            instances: Vec::new(),
            index: HashMap::new(),
            seed,
            tests,
        })
    }

    pub fn samplers(&self) -> &[ConditionalSampler] {
        &self.samplers
    }

    pub fn get(&self, id: InstanceId) -> &SamplerInstance {
        &self.instances[id as usize]
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Number of `sample` calls per sampler name.
    pub fn calls(&self) -> impl Iterator<Item = (&str, usize)> {
        self.samplers
            .iter()
            .zip(&self.calls)
            .map(|(s, c)| (s.name.as_str(), *c))
    }

    pub fn instance(&mut self, sampler: usize, inputs: Vec<Value>) -> InstanceId {
        let key = (sampler, inputs);
        if let Some(id) = self.index.get(&key) {
            return *id;
        }
        let id = self.instances.len() as InstanceId;
        self.instances.push(SamplerInstance {
            sampler,
            inputs: key.1.clone(),
            cursor: 0,
            exhausted: false,
            failures: 0,
            last_output: None,
            generator: None,
        });
        self.index.insert(key, id);
        id
    }

    pub fn lookup(&self, sampler: usize, inputs: &[Value]) -> Option<InstanceId> {
        self.index.get(&(sampler, inputs.to_vec())).copied()
    }

    pub fn describe(&self, id: InstanceId) -> String {
        let s = self.get(id);
        let args: Vec<String> = s.inputs.iter().map(|v| v.to_string()).collect();
        format!("{}({})", self.samplers[s.sampler].name, args.join(", "))
    }

    /// Instances of samplers without inputs.
    pub fn nullary(&mut self) -> Vec<InstanceId> {
        let ids: Vec<usize> = (0..self.samplers.len())
            .filter(|i| self.input_types[*i].is_empty())
            .collect();
        ids.into_iter()
            .map(|i| self.instance(i, Vec::new()))
            .collect()
    }

    /// Instances whose input tuples first became available with the pool
    /// entries `log[from..]` of `store`.
    pub fn instantiate_since(&mut self, store: &ElementStore, from: usize) -> Vec<InstanceId> {
        let mut out = Vec::new();
        for entry in store.log()[from..].iter() {
            for si in 0..self.samplers.len() {
                if !self.input_types[si].contains(&entry.ty) {
                    continue;
                }
                for inputs in store.combos_for_entry(&self.input_types[si], *entry) {
                    if let Some(f) = &self.samplers[si].input_filter {
                        if inputs.iter().all(|v| !v.is_lazy()) && !f(&inputs) {
                            continue;
                        }
                    }
                    out.push(self.instance(si, inputs));
                }
            }
        }
        out
    }

    /// Every instance available from `store`, nullary ones first.
    pub fn instantiate_all(&mut self, store: &ElementStore) -> Vec<InstanceId> {
        let mut out = self.nullary();
        out.extend(self.instantiate_since(store, 0));
        out
    }

    /// Draw the next output of an instance. Failed draws count as visits
    /// but leave the instance live.
    pub fn sample(&mut self, id: InstanceId) -> Vec<Element> {
        let seed = self.seed;
        let inst = &mut self.instances[id as usize];
        if inst.exhausted {
            return Vec::new();
        }
        let sampler = &self.samplers[inst.sampler];
        self.calls[inst.sampler] += 1;
        let ctx = DrawContext {
            draw: inst.cursor,
            attempts: 10 * (inst.cursor + 1),
        };
        inst.cursor += 1;
        let generator = inst.generator.get_or_insert_with(|| {
            let rng = ChaCha8Rng::seed_from_u64(instance_seed(seed, &sampler.name, &inst.inputs));
            (sampler.factory)(&inst.inputs, rng)
        });
        let draw = generator.next(&ctx);
        let finished = generator.finished();
        let out = match draw {
            Draw::Output(values) => {
                debug_assert_eq!(
                    values.len(),
                    sampler.outputs,
                    "{} output arity",
                    sampler.name
                );
                let elements = sampler.elements(&inst.inputs, &values);
                inst.last_output = Some(values);
                elements
            }
            Draw::Exhausted => {
                inst.exhausted = true;
                Vec::new()
            }
            Draw::Failed => {
                inst.failures += 1;
                Vec::new()
            }
        };
        if finished {
            inst.exhausted = true;
        }
        for e in &out {
            if let Some(test) = self.tests.get(&*e.relation) {
                debug_assert!(
                    test(&e.values),
                    "{} emitted an element failing its test: {e}",
                    sampler.name
                );
            }
        }
        out
    }

    pub fn lazy_outputs(&self, id: InstanceId, mode: TokenMode) -> Vec<Value> {
        let inst = self.get(id);
        (0..self.samplers[inst.sampler].outputs)
            .map(|slot| {
                let origin = match mode {
                    TokenMode::PerSampler => LazyOrigin::Sampler {
                        sampler: inst.sampler as u32,
                        slot: slot as u32,
                    },
                    TokenMode::PerInstance => LazyOrigin::Instance {
                        instance: id,
                        slot: slot as u32,
                    },
                };
                Value::Lazy(LazySample(origin))
            })
            .collect()
    }

    /// Elements certified by an instance with placeholder outputs.
    pub fn sample_lazy(&self, id: InstanceId, mode: TokenMode) -> Vec<Element> {
        let inst = self.get(id);
        self.samplers[inst.sampler].elements(&inst.inputs, &self.lazy_outputs(id, mode))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallRecord {
    pub instance: InstanceId,
    pub produced: usize,
}

/// FIFO processing of sampler instances. Pops up to `k` instances (counting
/// those already in `processed`), inserts what `process` returns, and
/// queues instances that become available. `cursor` tracks the prefix of
/// the store's pool log already used for instantiation.
#[allow(clippy::too_many_arguments)]
pub fn process_samplers(
    table: &mut InstanceTable,
    queue: &mut VecDeque<InstanceId>,
    processed: &mut IndexSet<InstanceId>,
    store: &mut ElementStore,
    cursor: &mut usize,
    k: Option<usize>,
    skip: &dyn Fn(&InstanceTable, InstanceId) -> bool,
    process: &mut dyn FnMut(&mut InstanceTable, &mut ElementStore, InstanceId) -> usize,
) -> Vec<CallRecord> {
    let mut records = Vec::new();
    let mut queued: HashSet<InstanceId> = queue.iter().copied().collect();
    while !queue.is_empty() && k.is_none_or(|k| processed.len() < k) {
        let s = queue.pop_front().expect("non-empty queue");
        queued.remove(&s);
        let produced = process(table, store, s);
        records.push(CallRecord {
            instance: s,
            produced,
        });
        let fresh = table.instantiate_since(store, *cursor);
        *cursor = store.log().len();
        for s2 in fresh {
            if !queued.contains(&s2) && !processed.contains(&s2) && s2 != s && !skip(table, s2) {
                queued.insert(s2);
                queue.push_back(s2);
            }
        }
        processed.insert(s);
    }
    records
}
