//! Pre-main hint steering the BLAS kernel choice on masked virtual CPUs.
//!
//! OpenBLAS selects its compute kernels from the CPU family/model id at load
//! time. Virtual machines frequently expose a masked model ("Intel Xeon
//! Processor"), which lands on a conservative pre-AVX kernel set even when
//! the CPU advertises AVX-512, costing roughly 4x in matrix-product
//! throughput. The feature bits remain trustworthy, so when the full
//! Skylake-X AVX-512 subset is present and no core type was chosen by the
//! user, request the AVX-512 kernels explicitly. The hint has to land before
//! the first BLAS call anywhere in the process — lazy initialization from
//! call sites cannot guarantee that — hence a link-section constructor.

#[cfg(all(target_os = "linux", target_arch = "x86_64"))]
mod imp {
    extern "C" {
        // OpenBLAS' own guarded initializer. Statically linked archives only
        // run it if the linker happened to keep its constructor entry, so we
        // invoke it ourselves once the core hint is in place.
        fn gotoblas_init();
    }

    extern "C" fn set_core_hint() {
        // Runs pre-main on the sole thread, before any getenv/setenv races
        // or any BLAS initialization.
        if std::env::var_os("OPENBLAS_CORETYPE").is_none()
            && std::arch::is_x86_feature_detected!("avx512f")
            && std::arch::is_x86_feature_detected!("avx512dq")
            && std::arch::is_x86_feature_detected!("avx512bw")
            && std::arch::is_x86_feature_detected!("avx512vl")
        {
            std::env::set_var("OPENBLAS_CORETYPE", "SKYLAKEX");
        }
        unsafe { gotoblas_init() };
    }

    #[used]
    #[link_section = ".init_array"]
    static BLAS_CORE_HINT: extern "C" fn() = set_core_hint;
}
