import streamlit as st
import pandas as pd
import plotly.graph_objects as go

from config.presets import get_cluster_preset
from src.job_classifier import ClusterTable


def build_cluster_figure(table: ClusterTable) -> go.Figure:
    """Jobs per cluster (log scale), annotated with the deadline each cluster receives."""
    rows = table.rows()
    fig = go.Figure(go.Bar(
        x=[f"C{r['cluster']}" for r in rows],
        y=[r['jobs'] for r in rows],
        text=[f"D={r['deadline_slots']}" for r in rows],
        textposition='outside',
        hovertext=[f"{r['gigabytes']:,.2f} GB mean" for r in rows],
        marker_color='#3498db',
    ))
    fig.update_layout(xaxis_title='Cluster', yaxis_title='Jobs', yaxis_type='log', height=350)
    return fig


def render_cluster_view(table: ClusterTable):
    st.subheader("Job classes")
    st.plotly_chart(build_cluster_figure(table), use_container_width=True)
    st.dataframe(table.to_frame(), use_container_width=True, hide_index=True)


def render_preset_table(workload: str):
    """Cluster sizes and deadlines of a built-in workload preset."""
    frame = pd.DataFrame(get_cluster_preset(workload))
    st.dataframe(frame, use_container_width=True, hide_index=True)
