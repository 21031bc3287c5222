//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

use demo::CurveFit;

/// `[y..., dy...]` for `n` points on `[lo, hi]`.
#[wasm_bindgen(js_name = activationCurve)]
pub fn activation_curve(name: &str, alpha: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let xs = demo::grid(n, lo, hi);
    let (mut y, d) = demo::activation_curve(name, alpha, &xs)
        .ok_or_else(|| JsError::new(&format!("no scalar curve for `{name}`")))?;
    y.extend(d);
    Ok(y)
}

#[wasm_bindgen(js_name = describeModel)]
pub fn describe_model(text: &str) -> String {
    demo::describe_model(text).unwrap_or_else(|e| format!("error: {e}"))
}

#[wasm_bindgen]
pub struct Trainer {
    inner: CurveFit,
}

#[wasm_bindgen]
impl Trainer {
    #[wasm_bindgen(constructor)]
    pub fn new(target: &str, hidden: usize, width: usize, samples: usize, seed: u32) -> Result<Trainer, JsError> {
        CurveFit::new(target, hidden, width, samples, seed.into())
            .map(|inner| Trainer { inner })
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = setLearningRate)]
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.inner.set_learning_rate(lr);
    }

    pub fn train(&mut self, epochs: usize) -> Result<f64, JsError> {
        self.inner.train(epochs).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn epochs(&self) -> usize {
        self.inner.epochs_run()
    }

    pub fn history(&self) -> Vec<f64> {
        self.inner.history().to_vec()
    }

    #[wasm_bindgen(js_name = sampleX)]
    pub fn sample_x(&self) -> Vec<f64> {
        self.inner.samples().0
    }

    #[wasm_bindgen(js_name = sampleY)]
    pub fn sample_y(&self) -> Vec<f64> {
        self.inner.samples().1
    }

    pub fn predict(&self, n: usize) -> Vec<f64> {
        self.inner.predict(&demo::grid(n, demo::X_MIN, demo::X_MAX))
    }

    #[wasm_bindgen(js_name = ensemblePredict)]
    pub fn ensemble_predict(&self, n: usize, members: usize, noise: f64, seed: u32) -> Result<Vec<f64>, JsError> {
        self.inner
            .ensemble_predict(&demo::grid(n, demo::X_MIN, demo::X_MAX), members, noise, seed.into())
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = modelText)]
    pub fn model_text(&self) -> Result<String, JsError> {
        self.inner.model_text().map_err(|e| JsError::new(&e))
    }
}
