import streamlit as st
import plotly.graph_objects as go
from typing import List

from src.simulator import RunReport, SweepTable

ALGORITHM_COLORS = {
    'offline': '#2ecc71',
    'greedy': '#e74c3c',
    'A': '#3498db',
    'A_eps': '#9b59b6',
    'A_eps_m': '#f39c12',
}


def build_cost_figure(reports: List[RunReport]) -> go.Figure:
    """Per-slot cost, one line per run."""
    fig = go.Figure()
    for report in reports:
        name = report.algorithm.value
        per_slot = report.ledger.per_slot()
        fig.add_trace(go.Scatter(
            x=list(range(len(per_slot))),
            y=per_slot.tolist(),
            mode='lines',
            name=f"{name} ({report.total_cost:,.2f})",
            line=dict(color=ALGORITHM_COLORS.get(name)),
        ))
    fig.update_layout(xaxis_title='Slot', yaxis_title='Cost', hovermode='x unified', height=400)
    return fig


def build_load_figure(report: RunReport) -> go.Figure:
    """Executed load per data center, stacked."""
    fig = go.Figure()
    names = list(report.locations) or [f"dc{i}" for i in range(report.executed.shape[0])]
    for i, name in enumerate(names):
        fig.add_trace(go.Scatter(
            x=list(range(report.executed.shape[1])),
            y=report.executed[i].tolist(),
            mode='lines',
            stackgroup='load',
            name=name,
        ))
    fig.update_layout(xaxis_title='Slot', yaxis_title='Executed load', height=350)
    return fig


def build_sweep_figure(table: SweepTable, metric: str = 'reduction') -> go.Figure:
    """Cost reduction vs greedy (or total cost) against the deadline, one line per algorithm."""
    if metric not in ('reduction', 'total'):
        raise ValueError(f"metric must be 'reduction' or 'total', got '{metric}'")
    fig = go.Figure()
    algorithms = list(dict.fromkeys(r.algorithm for r in table.rows))
    for alg in algorithms:
        rows = [r for r in table.rows if r.algorithm == alg and r.error is None]
        values = [r.reduction_vs_greedy_pct if metric == 'reduction' else r.total_cost for r in rows]
        fig.add_trace(go.Scatter(
            x=[r.deadline for r in rows],
            y=values,
            mode='lines+markers',
            name=alg.value,
            line=dict(color=ALGORITHM_COLORS.get(alg.value)),
        ))
    fig.update_layout(
        xaxis_title='Deadline D (slots)',
        yaxis_title='Cost reduction vs greedy (%)' if metric == 'reduction' else 'Total cost',
        height=400,
    )
    return fig


def render_cost_charts(reports: List[RunReport]):
    if not reports:
        st.info("No runs to chart")
        return
    st.subheader("Cost per slot")
    st.plotly_chart(build_cost_figure(reports), use_container_width=True)

    st.subheader("Executed load")
    choice = st.selectbox("Run", [r.algorithm.value for r in reports], key="load_chart_run")
    selected = next(r for r in reports if r.algorithm.value == choice)
    st.plotly_chart(build_load_figure(selected), use_container_width=True)


def render_sweep_chart(table: SweepTable):
    if not table.rows:
        st.info("No sweep results")
        return
    metric = st.radio("Show", ['reduction', 'total'], horizontal=True, key="sweep_metric",
                      format_func=lambda m: 'Reduction vs greedy' if m == 'reduction' else 'Total cost')
    st.plotly_chart(build_sweep_figure(table, metric), use_container_width=True)
    failed = [r for r in table.rows if r.error]
    for row in failed:
        st.warning(f"D={row.deadline}, {row.algorithm.value}: {row.error}")
