use std::ffi::{CStr, CString};
use std::ptr;

use rulxai::simulate::{generate, SurrogateConfig};
use rulxai_ffi::*;

fn data_file(dir: &tempfile::TempDir) -> CString {
    let path = dir.path().join("train.txt");
    let table = generate(&SurrogateConfig::default()).unwrap();
    std::fs::write(&path, table.to_whitespace()).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rulxai_last_error()) }.to_string_lossy().into_owned()
}

unsafe fn load(path: &CString) -> *mut RulxaiDataset {
    let mut ds = ptr::null_mut();
    let st = rulxai_dataset_load(path.as_ptr(), false, 1, 0.2, 0, true, &mut ds);
    assert_eq!(st, RulxaiStatus::Ok, "{}", last_error());
    ds
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = data_file(&dir);
    unsafe {
        let ds = load(&path);
        assert_eq!(rulxai_dataset_n_rows(ds), 223);
        assert_eq!(rulxai_dataset_n_train(ds), 178);
        assert_eq!(rulxai_dataset_n_test(ds), 45);
        assert_eq!(rulxai_dataset_n_features(ds), 25);
        let names = [CString::new("cycle").unwrap(), CString::new("s11").unwrap()];
        let ptrs: Vec<_> = names.iter().map(|n| n.as_ptr()).collect();
        let mut sub = ptr::null_mut();
        assert_eq!(rulxai_dataset_select(ds, ptrs.as_ptr(), 2, &mut sub), RulxaiStatus::Ok);
        assert_eq!(rulxai_dataset_n_features(sub), 2);
        rulxai_dataset_free(sub);
        rulxai_dataset_free(ds);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut ds = ptr::null_mut();
        let missing = CString::new("/nonexistent/train.txt").unwrap();
        let st = rulxai_dataset_load(missing.as_ptr(), false, 1, 0.2, 0, true, &mut ds);
        assert_eq!(st, RulxaiStatus::Io);
        assert!(last_error().contains("/nonexistent/train.txt"));
        assert!(ds.is_null());
        assert_eq!(
            rulxai_dataset_load(ptr::null(), false, 1, 0.2, 0, true, &mut ds),
            RulxaiStatus::NullPointer
        );
        assert_eq!(rulxai_dataset_n_rows(ptr::null()), 0);
        rulxai_dataset_free(ptr::null_mut());
        rulxai_model_free(ptr::null_mut());
        rulxai_string_free(ptr::null_mut());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = data_file(&dir);
    unsafe {
        let ds = load(&path);
        let mut model = ptr::null_mut();
        let kind = CString::new("forest").unwrap();
        assert_eq!(
            rulxai_model_train(ds, kind.as_ptr(), ptr::null(), &mut model),
            RulxaiStatus::InvalidArgument
        );
        let kind = CString::new("tree").unwrap();
        let bad = CString::new("[1]").unwrap();
        assert_eq!(
            rulxai_model_train(ds, kind.as_ptr(), bad.as_ptr(), &mut model),
            RulxaiStatus::InvalidArgument
        );
        rulxai_dataset_free(ds);
    }
}

#[test]
fn train_predict_explain_save() {
    let dir = tempfile::tempdir().unwrap();
    let path = data_file(&dir);
    unsafe {
        let full = load(&path);
        let names: Vec<CString> = ["cycle", "s2", "s3", "s4", "s11"]
            .iter()
            .map(|n| CString::new(*n).unwrap())
            .collect();
        let ptrs: Vec<_> = names.iter().map(|n| n.as_ptr()).collect();
        let mut ds = ptr::null_mut();
        assert_eq!(rulxai_dataset_select(full, ptrs.as_ptr(), ptrs.len(), &mut ds), RulxaiStatus::Ok);

        let kind = CString::new("tree").unwrap();
        let spec = CString::new(r#"{"max_depth": 3}"#).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(rulxai_model_train(ds, kind.as_ptr(), spec.as_ptr(), &mut model), RulxaiStatus::Ok);
        assert_eq!(rulxai_model_n_features(model), 5);

        let x = [0.0, 0.5, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 0.5];
        let mut pred = [0.0; 2];
        assert_eq!(rulxai_model_predict(model, x.as_ptr(), 2, 5, pred.as_mut_ptr()), RulxaiStatus::Ok);
        assert!(pred[0] > pred[1]);
        assert_eq!(
            rulxai_model_predict(model, x.as_ptr(), 2, 4, pred.as_mut_ptr()),
            RulxaiStatus::InvalidArgument
        );

        let mut phi = [0.0; 5];
        let mut base = 0.0;
        assert_eq!(
            rulxai_model_shapley(model, full, 0, 0, phi.as_mut_ptr(), 5, &mut base),
            RulxaiStatus::Ok,
            "{}",
            last_error()
        );
        let mut one = [0.0];
        let mut json = ptr::null_mut();
        assert_eq!(rulxai_model_to_json(model, &mut json), RulxaiStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        rulxai_string_free(json);
        assert!(text.contains("\"kind\": \"tree\""));
        assert_eq!(
            rulxai_model_shapley(model, full, 0, 0, one.as_mut_ptr(), 1, &mut base),
            RulxaiStatus::BufferTooSmall
        );

        let file = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
        assert_eq!(rulxai_model_save(model, file.as_ptr()), RulxaiStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(rulxai_model_load(file.as_ptr(), &mut loaded), RulxaiStatus::Ok);
        let mut again = [0.0; 2];
        rulxai_model_predict(loaded, x.as_ptr(), 2, 5, again.as_mut_ptr());
        assert_eq!(pred, again);

        rulxai_model_free(loaded);
        rulxai_model_free(model);
        rulxai_dataset_free(ds);
        rulxai_dataset_free(full);
    }
}

#[test]
fn shapley_values_are_efficient() {
    let dir = tempfile::tempdir().unwrap();
    let path = data_file(&dir);
    let table = rulxai::ingest::load_records(path.to_str().unwrap(), rulxai::ingest::RecordFormat::Whitespace).unwrap();
    let reference = rulxai::ingest::build_dataset(&table, Some(1), true, Default::default())
        .unwrap()
        .with_features(&["cycle", "s4", "s11"])
        .unwrap();
    unsafe {
        let full = load(&path);
        let names: Vec<CString> = ["cycle", "s4", "s11"].iter().map(|n| CString::new(*n).unwrap()).collect();
        let ptrs: Vec<_> = names.iter().map(|n| n.as_ptr()).collect();
        let mut ds = ptr::null_mut();
        rulxai_dataset_select(full, ptrs.as_ptr(), 3, &mut ds);
        let kind = CString::new("figs").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(rulxai_model_train(ds, kind.as_ptr(), ptr::null(), &mut model), RulxaiStatus::Ok);
        let mut phi = [0.0; 3];
        let mut base = 0.0;
        assert_eq!(rulxai_model_shapley(model, ds, 4, 0, phi.as_mut_ptr(), 3, &mut base), RulxaiStatus::Ok);
        let row = reference.x().row(4).to_vec();
        let mut pred = 0.0;
        rulxai_model_predict(model, row.as_ptr(), 1, 3, &mut pred);
        assert!((base + phi.iter().sum::<f64>() - pred).abs() < 1e-9);
        rulxai_model_free(model);
        rulxai_dataset_free(ds);
        rulxai_dataset_free(full);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(rulxai_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
