{
    'name': 'Microstructure Design Orchestrator',
    'version': '1.0.0',
    'summary': 'Closed-loop inverse microstructure design with simulation-aware evolutionary search',
    'description': """
Microstructure Design Orchestrator
==================================

Deterministic design pipeline that turns a task file (targets, tolerances,
base material) into periodic voxel microstructures whose homogenized
properties meet the targets.

Features:
- Parser: task-file loading, stiffness feasibility clamping, consistency check
- Generator: gyroid level-set surrogate with retrieval seeding
- Simulator: periodic voxel FEA (elasticity, conduction), J2 plasticity
- Search: simulation-aware evolutionary search, NSGA-II, random, one-shot
- Reporter: Pareto front tables and the benchmark metric suite

Architecture:
- Pipeline: Manager state machine (parse, generate, simulate, decide, report)
- Session: one (task, method, seed) run and its evaluation history
- Worker pool: concurrent independent evaluations, ordered merge
    """,
    'data': [
        'data/task_schema.json',
        'data/tasks/task_01_two_physics_precise.json',
        'data/tasks/task_02_cross_physics_precise.json',
        'data/tasks/task_03_high_electrical.json',
        'data/tasks/task_04_thermal_stiffness.json',
        'data/tasks/task_05_tri_field.json',
        'data/tasks/task_06_pareto_thermal_mass.json',
        'data/tasks/task_07_three_objective_pareto.json',
        'data/tasks/task_08_iterative_design.json',
        'data/tasks/task_09_material_constraint.json',
        'data/tasks/task_10_extreme_performance.json',
        'data/tasks/task_11_flexible_polymer.json',
        'data/tasks/task_12_al6061_pareto.json',
        'data/tasks/task_13_alsi10mg_pareto.json',
        'data/tasks/task_14_thermal_plasticity.json',
        'data/tasks/task_15_high_strength.json',
        'data/tasks/task_16_high_thermal.json',
        'data/tasks/task_17_high_stiffness.json',
    ],
    'seed_library': 'data/seed_library.json',
    'env_prefix': 'MSDESIGN_',
}
