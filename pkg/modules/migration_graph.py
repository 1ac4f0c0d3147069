import streamlit as st
import graphviz

from src.simulator import RunReport


def build_migration_graph(report: RunReport, min_volume: float = 1e-9) -> graphviz.Digraph:
    """
    Data centers as nodes (with their energy cost), one edge per pair with migrated load.
    """
    names = list(report.locations) or [f"dc{i}" for i in range(report.executed.shape[0])]
    energy = report.ledger.energy.sum(axis=1)
    moved = report.migration_matrix

    dot = graphviz.Digraph(comment='Migration flow')
    dot.attr(rankdir='LR')
    dot.attr('node', shape='box', style='rounded,filled', fontname='Arial', fontsize='10')

    for i, name in enumerate(names):
        label = f"{name}\\nexecuted {report.executed[i].sum():,.2f}\\nenergy {energy[i]:,.2f}"
        dot.node(f"dc_{i}", label, fillcolor='#e3f2fd')

    for i in range(len(names)):
        for j in range(len(names)):
            if i != j and moved[i, j] > min_volume:
                width = 1 + 4 * moved[i, j] / max(moved.max(), min_volume)
                dot.edge(f"dc_{i}", f"dc_{j}", label=f"{moved[i, j]:,.2f}", color='#1976d2',
                         penwidth=f"{width:.2f}")
    return dot


def render_migration_graph(report: RunReport):
    st.subheader("Migration flow")
    if report.migration_matrix.sum() <= 0:
        st.info("No load was migrated in this run")
    st.graphviz_chart(build_migration_graph(report), use_container_width=True)
    st.caption(f"Migration cost: {report.ledger.migration_total:,.4f}")
