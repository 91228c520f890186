from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Leakage path enumeration
    max_paths: int = 256
    max_edges: int = 12

    # Bounded model checking (0 = derive from the path: 2 x blocks x pipeline_depth)
    max_k: int = 0
    pipeline_depth: int = 4

    # Proof engines
    induction_depth: int = 4
    houdini_rounds: int = 64
    explicit_state_bits: int = 20
    explicit_input_bits: int = 12

    # SAT backend (any pysat solver name)
    sat_backend: str = "cadical153"
    sat_conflict_budget: int = 0

    # Software constraints
    call_stack_depth: int = 8

    # Scheduling
    parallelism: int = 4

    # Netlist cache TTL (seconds)
    netlist_cache_ttl: int = 900

    # SQLite report store
    sqlite_db_path: str = "./leakcover.db"
    persist_reports: bool = False

    # Output
    output_dir: str = "./out"
    log_level: str = "INFO"

    model_config = {"env_file": ".env", "env_file_encoding": "utf-8", "env_prefix": "LEAKCOVER_"}


settings = Settings()
