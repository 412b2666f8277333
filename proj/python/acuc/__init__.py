"""AC unit commitment solver: python bindings over the C++ core."""

try:
    from ._acuc import (  # noqa: F401
        Case,
        Solution,
        check,
        generate_case,
        load_case,
        load_solution,
        market_surplus,
        save_case,
        save_solution,
        schedule_step_size,
        score,
        set_workers,
        solve,
    )
except ImportError:  # in-tree builds place the module on sys.path directly
    from _acuc import (  # noqa: F401
        Case,
        Solution,
        check,
        generate_case,
        load_case,
        load_solution,
        market_surplus,
        save_case,
        save_solution,
        schedule_step_size,
        score,
        set_workers,
        solve,
    )

__all__ = [
    "Case",
    "Solution",
    "check",
    "generate_case",
    "load_case",
    "load_solution",
    "market_surplus",
    "save_case",
    "save_solution",
    "schedule_step_size",
    "score",
    "set_workers",
    "solve",
]
