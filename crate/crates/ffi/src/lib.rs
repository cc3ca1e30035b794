//! C ABI over the kgprog engine.
//!
//! Handles are opaque and owned by the caller: everything returned through
//! an `out` parameter must be released with the matching `kgp_*_free`
//! function. Functions never unwind across the boundary; a caught panic is
//! reported as `KGP_STATUS_INTERNAL`.
//!
//! Error reporting follows the usual two-step pattern: the return status
//! says what class of failure occurred, and `kgp_last_error` returns a
//! human-readable message for the most recent failure on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kgprog::dsl::Program;
use kgprog::interp::exec_program;
use kgprog::kg::{generate_toy_ehr_kg, KnowledgeGraph, ToyScale};
use kgprog::recovery::recover_program;

/// Opaque knowledge graph handle.
pub struct KgpKg(KnowledgeGraph);

/// Opaque program handle.
pub struct KgpProgram(Program);

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The graph text did not parse.
    BadKg = 3,
    /// The program text did not parse.
    BadProgram = 4,
    /// The program parsed but is not well-typed.
    TypeError = 5,
    /// Execution failed (non-numeric threshold, empty aggregate, ...).
    RuntimeError = 6,
    /// A panic or other defect inside the library.
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::default();
    });
}

fn fail(status: KgpStatus, message: &str) -> KgpStatus {
    set_last_error(message);
    status
}

/// Runs `body` with panics converted to `KGP_STATUS_INTERNAL`.
fn guarded(body: impl FnOnce() -> KgpStatus) -> KgpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(KgpStatus::Internal, "internal panic"),
    }
}

/// Borrows a C string as UTF-8, reporting the failure status on the side.
unsafe fn borrow_str<'a>(text: *const c_char) -> Result<&'a str, KgpStatus> {
    if text.is_null() {
        return Err(fail(KgpStatus::NullArgument, "text argument is null"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|e| fail(KgpStatus::InvalidUtf8, &e.to_string()))
}

fn give_string(text: String) -> *mut c_char {
    match CString::new(text.replace('\0', " ")) {
        Ok(s) => s.into_raw(),
        Err(_) => ptr::null_mut(),
    }
}

/// Message for the most recent failure on this thread, or an empty string
/// after a success. The pointer stays valid until the next kgp call on the
/// same thread; copy the contents if you need them longer.
#[no_mangle]
pub extern "C" fn kgp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static name for a status code, e.g. `"runtime error"`. Never null.
#[no_mangle]
pub extern "C" fn kgp_status_name(status: KgpStatus) -> *const c_char {
    let name: &'static CStr = match status {
        KgpStatus::Ok => c"ok",
        KgpStatus::NullArgument => c"null argument",
        KgpStatus::InvalidUtf8 => c"invalid utf-8",
        KgpStatus::BadKg => c"bad knowledge graph",
        KgpStatus::BadProgram => c"bad program",
        KgpStatus::TypeError => c"type error",
        KgpStatus::RuntimeError => c"runtime error",
        KgpStatus::Internal => c"internal error",
    };
    name.as_ptr()
}

/// Parses a knowledge graph from TSV text
/// (`subject\trelation\tobject\tent|lit`, `#` comments allowed).
///
/// # Safety
/// `text` must point to a NUL-terminated string. `out` must point to
/// writable storage for one pointer. On success `*out` owns the graph and
/// must be released with [`kgp_kg_free`]; on failure `*out` is untouched.
#[no_mangle]
pub unsafe extern "C" fn kgp_kg_parse(text: *const c_char, out: *mut *mut KgpKg) -> KgpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(KgpStatus::NullArgument, "out argument is null");
        }
        let source = match borrow_str(text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match KnowledgeGraph::parse_tsv(source) {
            Ok(kg) => {
                *out = Box::into_raw(Box::new(KgpKg(kg)));
                clear_last_error();
                KgpStatus::Ok
            }
            Err(e) => fail(KgpStatus::BadKg, &e.to_string()),
        }
    })
}

/// Generates the synthetic EHR-style graph used for demos and tests.
/// The same seed and sizes always produce the same graph.
///
/// # Safety
/// `out` must point to writable storage for one pointer. On success `*out`
/// owns the graph and must be released with [`kgp_kg_free`].
#[no_mangle]
pub unsafe extern "C" fn kgp_kg_generate(
    seed: u64,
    patients: usize,
    admissions_per_patient: usize,
    out: *mut *mut KgpKg,
) -> KgpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(KgpStatus::NullArgument, "out argument is null");
        }
        let kg = generate_toy_ehr_kg(
            seed,
            ToyScale {
                patients,
                admissions_per_patient,
            },
        );
        *out = Box::into_raw(Box::new(KgpKg(kg)));
        clear_last_error();
        KgpStatus::Ok
    })
}

/// Number of triples in the graph; 0 for a null handle.
///
/// # Safety
/// `kg` must be null or a live handle from `kgp_kg_parse`/`kgp_kg_generate`.
#[no_mangle]
pub unsafe extern "C" fn kgp_kg_triple_count(kg: *const KgpKg) -> usize {
    if kg.is_null() {
        return 0;
    }
    (*kg).0.len()
}

/// Releases a graph handle. Null is a no-op.
///
/// # Safety
/// `kg` must be null or a handle not yet freed; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kgp_kg_free(kg: *mut KgpKg) {
    if !kg.is_null() {
        drop(Box::from_raw(kg));
    }
}

/// Parses a program, one `rN = op(args)` step per line.
///
/// # Safety
/// `text` must point to a NUL-terminated string. `out` must point to
/// writable storage for one pointer. On success `*out` owns the program
/// and must be released with [`kgp_program_free`].
#[no_mangle]
pub unsafe extern "C" fn kgp_program_parse(
    text: *const c_char,
    out: *mut *mut KgpProgram,
) -> KgpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(KgpStatus::NullArgument, "out argument is null");
        }
        let source = match borrow_str(text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match Program::parse(source) {
            Ok(program) => {
                *out = Box::into_raw(Box::new(KgpProgram(program)));
                clear_last_error();
                KgpStatus::Ok
            }
            Err(e) => fail(KgpStatus::BadProgram, &e.to_string()),
        }
    })
}

/// Renders a program back to its newline-separated text form.
/// Returns a string to release with [`kgp_string_free`], or null for a
/// null handle.
///
/// # Safety
/// `program` must be null or a live handle from `kgp_program_parse` or
/// `kgp_recover`.
#[no_mangle]
pub unsafe extern "C" fn kgp_program_render(program: *const KgpProgram) -> *mut c_char {
    if program.is_null() {
        return ptr::null_mut();
    }
    match catch_unwind(AssertUnwindSafe(|| give_string((*program).0.render()))) {
        Ok(s) => s,
        Err(_) => ptr::null_mut(),
    }
}

/// Releases a program handle. Null is a no-op.
///
/// # Safety
/// `program` must be null or a handle not yet freed; it is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn kgp_program_free(program: *mut KgpProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Executes a program against a graph. On success `*out_answer` holds the
/// canonical answer text (entities or literals one per line, numbers in
/// their shortest round-trip form); release it with [`kgp_string_free`].
///
/// # Safety
/// `kg` and `program` must be live handles. `out_answer` must point to
/// writable storage for one pointer; it is untouched on failure.
#[no_mangle]
pub unsafe extern "C" fn kgp_exec(
    kg: *const KgpKg,
    program: *const KgpProgram,
    out_answer: *mut *mut c_char,
) -> KgpStatus {
    guarded(|| {
        if kg.is_null() || program.is_null() || out_answer.is_null() {
            return fail(KgpStatus::NullArgument, "kg, program, and out_answer are required");
        }
        let trace = match exec_program(&(*program).0, &(*kg).0) {
            Ok(trace) => trace,
            Err(e) => return fail(KgpStatus::TypeError, &e.to_string()),
        };
        match trace.outcome {
            Ok(value) => {
                let text = give_string(value.canonical_text());
                if text.is_null() {
                    return fail(KgpStatus::Internal, "answer text not representable");
                }
                *out_answer = text;
                clear_last_error();
                KgpStatus::Ok
            }
            Err(e) => fail(KgpStatus::RuntimeError, &e.to_string()),
        }
    })
}

/// Rewrites equality-filter values that do not occur in the graph,
/// replacing each with the closest value found for its relation. Writes a
/// new program handle to `*out_program` (the input is untouched) and, when
/// `out_repairs` is non-null, the number of values that changed.
///
/// # Safety
/// `kg` and `program` must be live handles. `out_program` must point to
/// writable storage for one pointer; on success `*out_program` must be
/// released with [`kgp_program_free`]. `out_repairs` may be null.
#[no_mangle]
pub unsafe extern "C" fn kgp_recover(
    kg: *const KgpKg,
    program: *const KgpProgram,
    out_program: *mut *mut KgpProgram,
    out_repairs: *mut usize,
) -> KgpStatus {
    guarded(|| {
        if kg.is_null() || program.is_null() || out_program.is_null() {
            return fail(KgpStatus::NullArgument, "kg, program, and out_program are required");
        }
        let (repaired, records) = recover_program(&(*program).0, &(*kg).0);
        if !out_repairs.is_null() {
            *out_repairs = records
                .iter()
                .filter(|r| {
                    matches!(
                        r.outcome,
                        kgprog::recovery::RecoveryOutcome::Replaced { .. }
                    )
                })
                .count();
        }
        *out_program = Box::into_raw(Box::new(KgpProgram(repaired)));
        clear_last_error();
        KgpStatus::Ok
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by `kgp_program_render` or
/// `kgp_exec`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kgp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
