//! Python bindings. Bit words cross the boundary as `"0101..."` strings with
//! the first transmitted bit first; symbols as Python `complex`.

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use symgrand::grand::{BitLevelPatterns, PatternSource, SymbolLevelPatterns};
use symgrand::harness::{self, GridSpec, OutputFormat};
use symgrand::likelihood;
use symgrand::{BitWord, DecodeOutcome, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn word(bits: &str) -> PyResult<BitWord> {
    parse(bits)
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "LinearCode", module = "symgrand_py", frozen)]
struct PyLinearCode {
    inner: symgrand::LinearCode,
}

#[pymethods]
impl PyLinearCode {
    /// Seeded systematic random linear code.
    #[new]
    #[pyo3(signature = (n, k, seed=1))]
    fn new(n: usize, k: usize, seed: u64) -> PyResult<Self> {
        Ok(PyLinearCode {
            inner: symgrand::LinearCode::random(n, k, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_text(generator: &str, parity_check: &str) -> PyResult<Self> {
        let g = symgrand::Gf2Matrix::from_text(generator).map_err(py_err)?;
        let h = symgrand::Gf2Matrix::from_text(parity_check).map_err(py_err)?;
        Ok(PyLinearCode {
            inner: symgrand::LinearCode::from_matrices(g, h).map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn encode(&self, message: &str) -> PyResult<String> {
        Ok(self.inner.encode(&word(message)?).map_err(py_err)?.to_string())
    }

    fn syndrome(&self, y: &str) -> PyResult<String> {
        Ok(self.inner.syndrome(&word(y)?).map_err(py_err)?.to_string())
    }

    fn is_codeword(&self, y: &str) -> PyResult<bool> {
        self.inner.is_codeword(&word(y)?).map_err(py_err)
    }

    fn generator_text(&self) -> String {
        self.inner.generator().to_text()
    }

    fn parity_check_text(&self) -> String {
        self.inner.parity_check().to_text()
    }

    fn __repr__(&self) -> String {
        format!("LinearCode(n={}, k={})", self.inner.n(), self.inner.k())
    }
}

#[pyclass(name = "Constellation", module = "symgrand_py", frozen)]
struct PyConstellation {
    inner: symgrand::Constellation,
}

#[pymethods]
impl PyConstellation {
    #[new]
    #[pyo3(signature = (order=16, es=1.0))]
    fn new(order: usize, es: f64) -> PyResult<Self> {
        Ok(PyConstellation {
            inner: symgrand::Constellation::new(order, es).map_err(py_err)?,
        })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn bits_per_symbol(&self) -> usize {
        self.inner.bits_per_symbol()
    }

    /// Half the minimum distance.
    #[getter]
    fn d(&self) -> f64 {
        self.inner.d()
    }

    fn point(&self, label: &str) -> PyResult<Complex64> {
        let v = self.label_value(label)?;
        Ok(self.inner.point(v))
    }

    /// `"corner"`, `"side"` or `"inner"`.
    fn class_of(&self, label: &str) -> PyResult<String> {
        let n = self.inner.classify_and_neighbors(&word(label)?).map_err(py_err)?;
        Ok(format!("{:?}", n.class).to_lowercase())
    }

    /// E1 and E2 error strings of a label.
    fn neighbours(&self, label: &str) -> PyResult<(Vec<String>, Vec<String>)> {
        let n = self.inner.classify_and_neighbors(&word(label)?).map_err(py_err)?;
        let text = |v: &[BitWord]| v.iter().map(|w| w.to_string()).collect();
        Ok((text(&n.e1), text(&n.e2)))
    }

    fn modulate(&self, bits: &str) -> PyResult<Vec<Complex64>> {
        self.inner.modulate(&word(bits)?).map_err(py_err)
    }

    fn hard_detect(&self, r: Vec<Complex64>) -> String {
        self.inner.hard_detect(&r).to_string()
    }

    fn dump(&self) -> String {
        self.inner.dump()
    }
}

impl PyConstellation {
    fn label_value(&self, label: &str) -> PyResult<u32> {
        let w = word(label)?;
        if w.len() != self.inner.bits_per_symbol() {
            return Err(py_err(Error::LengthMismatch {
                expected: self.inner.bits_per_symbol(),
                actual: w.len(),
            }));
        }
        Ok(w.slice_value(0, w.len()) as u32)
    }
}

fn outcome_dict(py: Python<'_>, out: &DecodeOutcome) -> PyResult<Py<PyAny>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("decoded", out.is_decoded())?;
    d.set_item("codeword", out.codeword.as_ref().map(|w| w.to_string()))?;
    d.set_item("error_pattern", out.error_pattern.as_ref().map(|w| w.to_string()))?;
    d.set_item("tests", out.tests)?;
    Ok(d.into_any().unbind())
}

/// Syndrome-based GRAND decoder bound to one code.
#[pyclass(name = "Decoder", module = "symgrand_py", frozen)]
struct PyDecoder {
    inner: symgrand::SyndromeDecoder,
    n: usize,
}

#[pymethods]
impl PyDecoder {
    #[new]
    fn new(code: &PyLinearCode) -> PyResult<Self> {
        Ok(PyDecoder {
            inner: symgrand::SyndromeDecoder::new(&code.inner).map_err(py_err)?,
            n: code.inner.n(),
        })
    }

    /// Bit-level GRAND up to Hamming weight `w_th`.
    fn decode_bit(&self, py: Python<'_>, y: &str, w_th: usize) -> PyResult<Py<PyAny>> {
        let src = BitLevelPatterns::new(self.n, w_th).map_err(py_err)?;
        let out = self.inner.decode(&word(y)?, &src).map_err(py_err)?;
        outcome_dict(py, &out)
    }

    /// Symbol-level GRAND over the given `(l1, l2)` structures, in order.
    fn decode_symbol(
        &self,
        py: Python<'_>,
        y: &str,
        constellation: &PyConstellation,
        structures: Vec<(usize, usize)>,
    ) -> PyResult<Py<PyAny>> {
        let y = word(y)?;
        let labels = constellation.inner.labels_of(&y).map_err(py_err)?;
        let src = SymbolLevelPatterns::from_labels(labels, structures, &constellation.inner)
            .map_err(py_err)?;
        let out = self.inner.decode(&y, &src).map_err(py_err)?;
        outcome_dict(py, &out)
    }
}

fn pattern_strings(src: &dyn PatternSource, count: usize) -> Vec<String> {
    src.first_patterns(count).iter().map(|w| w.to_string()).collect()
}

#[pyfunction]
fn bit_patterns(n: usize, w_th: usize, count: usize) -> PyResult<Vec<String>> {
    let src = BitLevelPatterns::new(n, w_th).map_err(py_err)?;
    Ok(pattern_strings(&src, count))
}

#[pyfunction]
fn symbol_patterns(
    y: &str,
    constellation: &PyConstellation,
    structures: Vec<(usize, usize)>,
    count: usize,
) -> PyResult<Vec<String>> {
    let labels = constellation.inner.labels_of(&word(y)?).map_err(py_err)?;
    let src =
        SymbolLevelPatterns::from_labels(labels, structures, &constellation.inner).map_err(py_err)?;
    Ok(pattern_strings(&src, count))
}

#[pyfunction]
fn q_func(z: f64) -> f64 {
    likelihood::q_func(z)
}

#[pyfunction]
fn d_prime_from_snr(order: usize, snr_db: f64) -> f64 {
    likelihood::d_prime_from_snr(order, likelihood::db_to_linear(snr_db))
}

/// `{"correct": [...], "e1": [...], "e2": [...]}` indexed corner, side, inner.
#[pyfunction]
fn type_probs(py: Python<'_>, d_prime: f64) -> PyResult<Py<PyAny>> {
    let p = likelihood::type_probs(d_prime);
    let d = pyo3::types::PyDict::new(py);
    d.set_item("correct", p.correct.to_vec())?;
    d.set_item("e1", p.e1.to_vec())?;
    d.set_item("e2", p.e2.to_vec())?;
    Ok(d.into_any().unbind())
}

#[pyfunction]
fn structure_prob(l1: usize, l2: usize, l: usize, order: usize, d_prime: f64) -> PyResult<f64> {
    likelihood::structure_prob(l1, l2, l, order, d_prime).map_err(py_err)
}

#[pyfunction]
fn structure_prob_closed_form(
    l1: usize,
    l2: usize,
    l: usize,
    order: usize,
    d_prime: f64,
) -> PyResult<f64> {
    likelihood::structure_prob_closed_form(l1, l2, l, order, d_prime).map_err(py_err)
}

/// Most likely structures first, as `(l1, l2, probability)`.
#[pyfunction]
#[pyo3(signature = (l, order, snr_db, w_th=None, top=None))]
fn ordered_structures(
    l: usize,
    order: usize,
    snr_db: f64,
    w_th: Option<usize>,
    top: Option<usize>,
) -> PyResult<Vec<(usize, usize, f64)>> {
    Ok(likelihood::ordered_structures(l, order, snr_db, w_th, top)
        .map_err(py_err)?
        .into_iter()
        .map(|s| (s.l1, s.l2, s.probability))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (l, order, grid="0:0.25:33", w_th=None, top=None))]
fn structure_table(
    l: usize,
    order: usize,
    grid: &str,
    w_th: Option<usize>,
    top: Option<usize>,
) -> PyResult<String> {
    let grid: GridSpec = parse(grid)?;
    let table = likelihood::build_structure_table(l, order, &grid.values().map_err(py_err)?, w_th, top)
        .map_err(py_err)?;
    Ok(table.to_text())
}

#[pyfunction]
fn table_memory_bits(w_th: usize, top: usize, grid_size: usize) -> usize {
    likelihood::table_memory_bits(w_th, top, grid_size)
}

/// Monte Carlo sweep. Returns the results as a dict with `config` and `points`.
#[pyfunction]
#[pyo3(signature = (
    ebn0_db, n=128, k=103, order=16, channel="awgn", decoder="both", w_th=2, seed=1,
    code_seed=1, min_block_errors=100, max_blocks=1_000_000, top=Some(5),
    grid="0:0.25:33", uncoded=false, workers=0, format="json",
))]
#[allow(clippy::too_many_arguments)]
fn run_simulation(
    py: Python<'_>,
    ebn0_db: Vec<f64>,
    n: usize,
    k: usize,
    order: usize,
    channel: &str,
    decoder: &str,
    w_th: usize,
    seed: u64,
    code_seed: u64,
    min_block_errors: u64,
    max_blocks: u64,
    top: Option<usize>,
    grid: &str,
    uncoded: bool,
    workers: usize,
    format: &str,
) -> PyResult<Py<PyAny>> {
    let config = symgrand::SimConfig {
        n,
        k,
        order,
        channel: parse(channel)?,
        decoder: parse(decoder)?,
        w_th,
        ebn0_db,
        seed,
        code_seed,
        min_block_errors,
        max_blocks,
        table_grid: parse(grid)?,
        top_v: top,
        uncoded,
    };
    let format: OutputFormat = parse(format)?;
    let results = py
        .detach(|| harness::run_simulation(&config, workers))
        .map_err(py_err)?;
    match format {
        OutputFormat::Json => json_to_py(py, &harness::results_json(&results).map_err(py_err)?),
        OutputFormat::Csv => Ok(harness::results_csv(&results)
            .map_err(py_err)?
            .into_pyobject(py)?
            .into_any()
            .unbind()),
    }
}

/// Realized structure frequencies of uncoded AWGN blocks next to theory.
#[pyfunction]
#[pyo3(signature = (ebn0_db, order=16, l=32, blocks=1_000_000, seed=1, workers=0))]
fn validate_structures(
    py: Python<'_>,
    ebn0_db: Vec<f64>,
    order: usize,
    l: usize,
    blocks: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Py<PyAny>> {
    let config = symgrand::ValidationConfig {
        order,
        l,
        ebn0_db,
        blocks,
        seed,
    };
    let report = py
        .detach(|| harness::validate_structures(&config, workers))
        .map_err(py_err)?;
    json_to_py(py, &harness::validation_json(&report).map_err(py_err)?)
}

#[pymodule]
fn symgrand_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLinearCode>()?;
    m.add_class::<PyConstellation>()?;
    m.add_class::<PyDecoder>()?;
    m.add_function(wrap_pyfunction!(bit_patterns, m)?)?;
    m.add_function(wrap_pyfunction!(symbol_patterns, m)?)?;
    m.add_function(wrap_pyfunction!(q_func, m)?)?;
    m.add_function(wrap_pyfunction!(d_prime_from_snr, m)?)?;
    m.add_function(wrap_pyfunction!(type_probs, m)?)?;
    m.add_function(wrap_pyfunction!(structure_prob, m)?)?;
    m.add_function(wrap_pyfunction!(structure_prob_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(ordered_structures, m)?)?;
    m.add_function(wrap_pyfunction!(structure_table, m)?)?;
    m.add_function(wrap_pyfunction!(table_memory_bits, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(validate_structures, m)?)?;
    Ok(())
}
