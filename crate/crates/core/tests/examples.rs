macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        #[path = $file]
        mod $module;

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(beam_split, "../examples/beam_split.rs");
example!(codebook_error, "../examples/codebook_error.rs");
example!(essp_vs_lce, "../examples/essp_vs_lce.rs");
example!(
    representative_angles,
    "../examples/representative_angles.rs"
);
example!(multiuser, "../examples/multiuser.rs");
example!(imperfect_csi, "../examples/imperfect_csi.rs");
example!(scenario_sweep, "../examples/scenario_sweep.rs");
