//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

pub use demo::{Demo, CURVE_STRIDE, EPSILON_GRID};

fn js(e: tcn::TcnError) -> JsError {
    JsError::new(&e.to_string())
}

/// A synthetic benchmark plus the model trained on it.
#[wasm_bindgen(js_name = Demo)]
pub struct WasmDemo(Demo);

#[wasm_bindgen(js_class = Demo)]
impl WasmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<WasmDemo, JsError> {
        Demo::new(seed as u64).map(WasmDemo).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn n_objects(&self) -> usize {
        self.0.test.n_objects
    }

    #[wasm_bindgen(getter)]
    pub fn n_predicates(&self) -> usize {
        self.0.test.n_predicates
    }

    #[wasm_bindgen(getter)]
    pub fn n_test(&self) -> usize {
        self.0.test.len()
    }

    /// Flat rows of `[eps, r1, r2, r3, compression_ratio, error]`.
    pub fn compression_curve(&self) -> Result<Vec<f64>, JsError> {
        self.0.compression_curve().map_err(js)
    }

    /// Mean loss per epoch.
    pub fn train(&mut self, epochs: usize, lr0: f64, epsilon: f64) -> Result<Vec<f64>, JsError> {
        self.0.train(epochs, lr0, epsilon).map_err(js)
    }

    pub fn heatmap(&self, image: usize, predicate: usize) -> Result<Vec<f64>, JsError> {
        self.0.heatmap(image, predicate).map_err(js)
    }

    pub fn truth_mask(&self, image: usize, predicate: usize) -> Result<Vec<u8>, JsError> {
        self.0.truth_mask(image, predicate).map_err(js)
    }

    pub fn test_recall(&self, k: usize) -> Result<f64, JsError> {
        self.0.test_recall(k).map_err(js)
    }
}
