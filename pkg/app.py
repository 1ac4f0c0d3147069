import streamlit as st
import os
import json
from datetime import datetime

from config.presets import DEFAULT_SITES, MARKET_SITES, CLUSTER_PRESETS, get_sites
from config.settings import (
    DB_PATH, DEFAULT_CAPACITY, DEFAULT_FILTER_K, DEFAULT_MIGRATION_RATE_PER_1000KM, DEFAULT_SEED,
    DEFAULT_KMEANS_CLUSTERS, DEFAULT_SLOT_SECONDS, TOLERANCES, configure_logging,
)
from database import Database
from src.errors import GlbError
from src.predictor import PredictionMode, PredictionModel
from src.renderer import render_markdown, render_sweep_markdown, report_json
from src.simulator import Algorithm, RunConfig, run, sweep
from src.synthesizer import SynthesisSpec, corpus_by_name, synthesize_traces
from src.model import CloudConfig, DeadlineMode
from src.job_classifier import classify_jobs
from src.trace_loader import load_jobs_csv, load_price_csv, load_workload_csv
from modules.cost_charts import render_cost_charts, render_sweep_chart
from modules.migration_graph import render_migration_graph
from modules.cluster_view import render_cluster_view, render_preset_table

st.set_page_config(page_title="Load Balancing Simulator", page_icon="⚡", layout="wide")


@st.cache_resource
def init_system():
    configure_logging()
    return Database()


db = init_system()

# Initialize session state
if 'view_mode' not in st.session_state:
    st.session_state.view_mode = 'experiment'
if 'reports' not in st.session_state:
    st.session_state.reports = []
if 'sweep_table' not in st.session_state:
    st.session_state.sweep_table = None


def _save_upload(uploaded):
    temp_path = f"temp_{uploaded.name}"
    with open(temp_path, 'wb') as f:
        f.write(uploaded.getbuffer())
    return temp_path


def _scenario_inputs(source, nonuniform):
    """(cloud, prices, work, label) from the sidebar choices."""
    if source == "Corpus scenario":
        corpus = corpus_by_name()
        name = st.selectbox("Scenario", list(corpus))
        scenario = corpus[name]
        return scenario.cloud, scenario.prices, scenario.work, name

    if source == "Synthesize":
        col1, col2, col3 = st.columns(3)
        with col1:
            price_kind = st.selectbox("Prices", ["diurnal", "two_regime", "flat"])
            num_slots = st.number_input("Slots", min_value=4, max_value=2016, value=96, step=4)
        with col2:
            shape = st.selectbox("Workload shape", ["A", "B", "constant"])
            mean_load = st.number_input("Mean load per slot", min_value=0.0, value=5.0, step=1.0)
        with col3:
            noise = st.number_input("History noise", min_value=0.0, value=2.0, step=0.5)
            period = st.number_input("Cycle length (slots)", min_value=2, value=48, step=2)
        spec = SynthesisSpec(num_slots=int(num_slots), price_kind=price_kind, workload_shape=shape,
                             mean_load=mean_load, history_noise=noise, period=int(period),
                             classes="A" if nonuniform else None)
        prices, work = synthesize_traces(spec)
        return spec.cloud(), prices, work, f"synthetic-{price_kind}-{shape}"

    prices_file = st.file_uploader("Price CSV (day,slot,location,price)", type=['csv'])
    work_file = st.file_uploader("Workload CSV (slot,load or slot,deadline_class,load)", type=['csv'])
    if not prices_file or not work_file:
        return None
    paths = [_save_upload(prices_file), _save_upload(work_file)]
    try:
        prices = load_price_csv(paths[0])
        work = load_workload_csv(paths[1])
    finally:
        for path in paths:
            if os.path.exists(path):
                os.remove(path)
    names = prices.locations
    if all(n in MARKET_SITES for n in names):
        cloud = CloudConfig.from_locations(get_sites(names), DEFAULT_MIGRATION_RATE_PER_1000KM)
    else:
        cloud = CloudConfig.uniform(len(names), names=names)
    return cloud, prices, work, prices_file.name


# Header with actions
col1, col2, col3, col4 = st.columns([3, 1, 1, 1])
with col1:
    st.title("⚡ Geographical Load Balancing")
with col2:
    if st.button("🧪 Experiment", use_container_width=True):
        st.session_state.view_mode = 'experiment'
        st.rerun()
with col3:
    if st.button("📚 Run History", use_container_width=True):
        st.session_state.view_mode = 'history'
        st.rerun()
with col4:
    if st.button("⚙️ Settings", use_container_width=True):
        st.session_state.view_mode = 'settings'
        st.rerun()

st.divider()

if st.session_state.view_mode == 'history':
    # HISTORY VIEW
    st.subheader("Run History")

    runs = db.get_all_runs()

    if not runs:
        st.info("No saved runs yet. Run an experiment and click 'Save runs'.")
    else:
        for record in runs:
            title = f"{record.algorithm} D={record.horizon} - {record.label} - {record.created_at.strftime('%Y-%m-%d %H:%M')}"
            with st.expander(title):
                col1, col2, col3, col4 = st.columns(4)
                with col1:
                    st.metric("Total cost", f"{record.total_cost:,.2f}")
                with col2:
                    st.metric("Migration", f"{record.migration_cost:,.2f}")
                with col3:
                    st.metric("Max pred. error", f"{record.max_prediction_error:.3f}")
                with col4:
                    st.metric("Violations", record.deadline_violations)

                st.download_button("⬇️ report.json", record.report_json, file_name=f"report_{record.id}.json",
                                   key=f"report_{record.id}")
                st.download_button("⬇️ ledger.csv", record.ledger_csv, file_name=f"ledger_{record.id}.csv",
                                   key=f"ledger_{record.id}")
                if st.checkbox("Show report", key=f"show_{record.id}"):
                    st.json(json.loads(record.report_json))
                if st.button("🗑️ Delete", key=f"delete_{record.id}"):
                    db.delete_run(record.id)
                    st.rerun()

elif st.session_state.view_mode == 'settings':
    # SETTINGS VIEW
    st.subheader("⚙️ Settings")

    tab1, tab2, tab3 = st.tabs(["Configuration", "Workload Presets", "About"])

    with tab1:
        st.markdown("### Defaults")
        st.caption("Override through `.env` (GLB_CAPACITY, GLB_SEED, GLB_MIGRATION_RATE_PER_1000KM, GLB_DB_PATH, GLB_LOG_LEVEL)")
        col1, col2 = st.columns(2)
        with col1:
            st.text_input("Slot length (s)", value=str(DEFAULT_SLOT_SECONDS), disabled=True)
            st.text_input("Capacity M_i", value=str(DEFAULT_CAPACITY), disabled=True)
            st.text_input("Seed", value=str(DEFAULT_SEED), disabled=True)
        with col2:
            st.text_input("Variance filter (k1, k2, k7)", value=str(DEFAULT_FILTER_K), disabled=True)
            st.text_input("Migration rate per 1000 km", value=str(DEFAULT_MIGRATION_RATE_PER_1000KM), disabled=True)
            st.text_input("Run database", value=DB_PATH, disabled=True)
        st.markdown("#### Tolerances")
        st.json({"feasibility": TOLERANCES.feasibility, "objective_rel": TOLERANCES.objective_rel,
                 "nonnegativity": TOLERANCES.nonnegativity})
        st.markdown("#### Sites")
        st.json({name: MARKET_SITES[name] for name in DEFAULT_SITES})

    with tab2:
        st.markdown("### Job classes per workload")
        workload = st.radio("Workload", sorted(CLUSTER_PRESETS), horizontal=True)
        render_preset_table(workload)

        st.divider()
        st.markdown("### Classify a job trace")
        jobs_file = st.file_uploader("Jobs CSV (submit_seconds,length_slots,map_bytes,shuffle_bytes,reduce_bytes,preemptive)",
                                     type=['csv'])
        k = st.number_input("Clusters", min_value=1, max_value=50, value=DEFAULT_KMEANS_CLUSTERS, step=1)
        if jobs_file and st.button("Classify"):
            path = _save_upload(jobs_file)
            try:
                jobs, _ = load_jobs_csv(path)
                table, _ = classify_jobs(jobs, int(k), DEFAULT_SEED)
                render_cluster_view(table)
            except GlbError as e:
                st.error(f"Classification failed: {e}")
            finally:
                os.remove(path)

    with tab3:
        st.markdown("### About")
        st.markdown("""
        **Built with:** Streamlit, NumPy, pandas, scikit-learn, Plotly, Graphviz

        **Algorithms:**
        - Greedy: each release runs immediately at the cheapest data centers
        - Offline: one linear program over the whole trace with perfect prices
        - A: online dispatch and retiming with exact future prices
        - A_eps: online dispatch and retiming with predicted prices
        - A_eps_m: as A_eps, plus migration between data centers
        """)

else:
    # EXPERIMENT VIEW
    st.subheader("Experiment")

    with st.sidebar:
        st.markdown("### Scenario")
        source = st.radio("Source", ["Corpus scenario", "Synthesize", "Upload CSV"])
        nonuniform = st.checkbox("Per-class deadlines")
        st.markdown("### Algorithms")
        algorithms = st.multiselect("Algorithms", [a.value for a in Algorithm],
                                    default=["greedy", "offline", "A", "A_eps", "A_eps_m"])
        deadline = st.slider("Deadline D (slots)", min_value=0, max_value=12, value=4)
        mode = st.selectbox("Prediction", [m.value for m in PredictionMode])
        seed = st.number_input("Seed", min_value=0, value=DEFAULT_SEED, step=1)

    try:
        inputs = _scenario_inputs(source, nonuniform)
    except GlbError as e:
        st.error(f"Could not load scenario: {e}")
        inputs = None

    if inputs is None:
        st.info("Upload a price CSV and a workload CSV to continue")
    else:
        cloud, prices, work, label = inputs
        col1, col2, col3 = st.columns(3)
        with col1:
            st.metric("Data centers", cloud.n)
        with col2:
            st.metric("Slots", work.T)
        with col3:
            st.metric("Released load", f"{work.released.sum():,.2f}")

        deadline_mode = DeadlineMode.NONUNIFORM if nonuniform and work.is_nonuniform else DeadlineMode.UNIFORM
        prediction = PredictionModel(rng_seed=int(seed), mode=mode)
        tab_run, tab_sweep = st.tabs(["Run", "Deadline sweep"])

        with tab_run:
            if st.button("▶️ Run", type="primary", use_container_width=True, disabled=not algorithms):
                reports = []
                progress = st.progress(0)
                base = RunConfig(algorithms[0], cloud.with_horizon(deadline), prices, work, prediction,
                                 deadline_mode, label)
                for k, alg in enumerate(algorithms, 1):
                    try:
                        reports.append(run(base.with_algorithm(alg)))
                    except GlbError as e:
                        st.error(f"{alg} failed: {e}")
                    progress.progress(k / len(algorithms))
                st.session_state.reports = reports

            reports = st.session_state.reports
            if reports:
                cols = st.columns(len(reports))
                for col, report in zip(cols, reports):
                    with col:
                        st.metric(report.algorithm.value, f"{report.total_cost:,.2f}",
                                  delta=None if report.ok else f"{len(report.violations)} violations",
                                  delta_color="inverse")
                render_cost_charts(reports)

                migrating = [r for r in reports if r.algorithm == Algorithm.A_EPS_M]
                if migrating:
                    render_migration_graph(migrating[0])

                with st.expander("📄 Summaries"):
                    for report in reports:
                        st.markdown(render_markdown(report))
                        st.download_button(f"⬇️ {report.algorithm.value} report.json", report_json(report),
                                           file_name=f"report_{report.algorithm.value}.json",
                                           key=f"dl_{report.algorithm.value}")

                if st.button("💾 Save runs"):
                    for report in reports:
                        db.save_run(report, seed=int(seed))
                    st.success(f"✓ Saved {len(reports)} runs at {datetime.now().strftime('%H:%M:%S')}")

        with tab_sweep:
            deadlines = st.slider("Deadline range", min_value=0, max_value=12, value=(0, 6))
            if st.button("▶️ Sweep", use_container_width=True, disabled=not algorithms):
                base = RunConfig(algorithms[0], cloud, prices, work, prediction, deadline_mode, label)
                with st.spinner("Sweeping..."):
                    st.session_state.sweep_table = sweep(base, list(range(deadlines[0], deadlines[1] + 1)),
                                                         algorithms)
            table = st.session_state.sweep_table
            if table is not None:
                render_sweep_chart(table)
                st.markdown(render_sweep_markdown(table))
