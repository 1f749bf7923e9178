/** DOM rendering. The shell (banner / sidebar / viewer slots) is built once;
 * every state change re-renders the banner and roster from scratch and syncs
 * the viewer in place, so a slider drag survives its own updates. */

import { sliceUrl } from './api.js';
import { emptyMessage, visibleScans } from './state.js';
import type { AppState, Axis, StatusFilter, ViewerState } from './state.js';
import type { Scan, Verdict } from './types.js';

export interface Handlers {
  onFilter(filter: StatusFilter): void;
  onSelect(scanId: string): void;
  onRetry(): void;
  onAxisIndex(axis: Axis, index: number): void;
  onActiveAxis(axis: Axis): void;
  onOverlayToggle(): void;
  onVerdict(verdict: Verdict): void;
}

const AXES: { axis: Axis; name: string }[] = [
  { axis: 2, name: 'axial' },
  { axis: 1, name: 'coronal' },
  { axis: 0, name: 'sagittal' },
];

const FILTERS: StatusFilter[] = ['all', 'pending', 'included', 'excluded'];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = '',
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function badge(text: string, kind: string): HTMLElement {
  return el('span', `badge badge-${kind}`, text);
}

function scanBadges(scan: Scan): HTMLElement[] {
  const out = [badge(scan.status, scan.status)];
  if (scan.verdict) out.push(badge(scan.verdict, scan.verdict));
  if (scan.exclusion_reason) out.push(badge(scan.exclusion_reason, 'reason'));
  return out;
}

interface ViewerDom {
  scanId: string;
  section: HTMLElement;
  title: HTMLElement;
  badges: HTMLElement;
  overlayBox: HTMLInputElement;
  note: HTMLInputElement;
  panes: { axis: Axis; figure: HTMLElement; img: HTMLImageElement; slider: HTMLInputElement; readout: HTMLElement }[];
}

export interface View {
  render(state: AppState): void;
  /** Free-text note sent with the next verdict. */
  verdictNote(): string;
}

export function createView(root: HTMLElement, handlers: Handlers): View {
  root.textContent = '';
  const bannerSlot = el('div');
  const layout = el('div', 'layout');
  const sidebar = el('aside', 'sidebar');
  const viewerSlot = el('main', 'viewer-slot');
  layout.append(sidebar, viewerSlot);
  root.append(bannerSlot, layout);

  let viewerDom: ViewerDom | null = null;

  function renderBanner(state: AppState): void {
    bannerSlot.textContent = '';
    if (state.connection === 'down') {
      const banner = el('div', 'banner banner-down', 'Cannot reach the review API. ');
      const retry = el('button', 'retry', 'Retry');
      retry.addEventListener('click', handlers.onRetry);
      banner.append(retry);
      bannerSlot.append(banner);
    } else if (state.notice) {
      bannerSlot.append(el('div', 'banner banner-notice', state.notice));
    }
  }

  function renderSidebar(state: AppState): void {
    sidebar.textContent = '';
    const header = el('div', 'sidebar-header');
    header.append(el('h1', '', 'scan review'));

    const filter = el('select', 'filter');
    for (const option of FILTERS) {
      const opt = el('option', '', option);
      opt.value = option;
      filter.append(opt);
    }
    filter.value = state.filter;
    filter.addEventListener('change', () => handlers.onFilter(filter.value as StatusFilter));
    header.append(filter);
    sidebar.append(header);

    const rows = visibleScans(state.scans, state.filter);
    if (rows.length === 0) {
      sidebar.append(el('p', 'empty', emptyMessage(state.scans, state.filter) ?? ''));
      return;
    }
    const list = el('ul', 'scan-list');
    for (const scan of rows) {
      const item = el('li', scan.scan_id === state.viewer?.scanId ? 'scan-row selected' : 'scan-row');
      const button = el('button', 'scan-id', scan.scan_id);
      button.addEventListener('click', () => handlers.onSelect(scan.scan_id));
      item.append(button, ...scanBadges(scan));
      list.append(item);
    }
    sidebar.append(list);
  }

  function buildViewer(state: AppState, viewer: ViewerState): ViewerDom {
    const section = el('section', 'viewer');
    const head = el('div', 'viewer-head');
    const title = el('h2', '', viewer.scanId);
    const badges = el('span', 'viewer-badges');
    head.append(title, badges);

    const controls = el('div', 'controls');
    const overlayLabel = el('label', 'overlay-label', ' label overlay');
    const overlayBox = el('input') as HTMLInputElement;
    overlayBox.type = 'checkbox';
    overlayBox.disabled = !viewer.hasLabels;
    overlayBox.addEventListener('change', handlers.onOverlayToggle);
    overlayLabel.prepend(overlayBox);

    const note = el('input', 'note') as HTMLInputElement;
    note.type = 'text';
    note.placeholder = 'verdict note (optional)';

    const accept = el('button', 'verdict-accept', 'Accept (A)');
    accept.addEventListener('click', () => handlers.onVerdict('accepted'));
    const reject = el('button', 'verdict-reject', 'Reject (R)');
    reject.addEventListener('click', () => handlers.onVerdict('rejected'));
    controls.append(overlayLabel, note, accept, reject);

    const panes: ViewerDom['panes'] = [];
    const paneRow = el('div', 'panes');
    for (const { axis, name } of AXES) {
      const figure = el('figure', 'pane');
      figure.addEventListener('click', () => handlers.onActiveAxis(axis));
      const img = el('img', 'slice') as HTMLImageElement;
      img.alt = `${name} slice of ${viewer.scanId}`;
      const slider = el('input', 'scrubber') as HTMLInputElement;
      slider.type = 'range';
      slider.min = '0';
      slider.max = String(Math.max(0, viewer.dims[axis] - 1));
      slider.addEventListener('input', () =>
        handlers.onAxisIndex(axis, Number.parseInt(slider.value, 10)),
      );
      const readout = el('figcaption', 'readout');
      figure.append(img, slider, readout);
      paneRow.append(figure);
      panes.push({ axis, figure, img, slider, readout });
    }

    section.append(head, controls, paneRow);
    viewerSlot.textContent = '';
    viewerSlot.append(section);
    return { scanId: viewer.scanId, section, title, badges, overlayBox, note, panes };
  }

  function syncViewer(state: AppState, viewer: ViewerState, dom: ViewerDom): void {
    dom.badges.textContent = '';
    const scan = state.scans.find((s) => s.scan_id === viewer.scanId);
    if (scan) dom.badges.append(...scanBadges(scan));

    dom.overlayBox.checked = viewer.overlay;
    for (const pane of dom.panes) {
      const index = viewer.indices[pane.axis];
      const src = sliceUrl(viewer.scanId, pane.axis, index, viewer.overlay);
      if (pane.img.getAttribute('src') !== src) pane.img.setAttribute('src', src);
      if (pane.slider.value !== String(index)) pane.slider.value = String(index);
      const name = AXES.find((a) => a.axis === pane.axis)?.name ?? '';
      pane.readout.textContent = `${name} · ${index} / ${viewer.dims[pane.axis] - 1}`;
      pane.figure.classList.toggle('active', viewer.activeAxis === pane.axis);
    }
  }

  function renderViewer(state: AppState): void {
    const viewer = state.viewer;
    if (!viewer) {
      viewerDom = null;
      viewerSlot.textContent = '';
      viewerSlot.append(el('p', 'empty', 'Select a scan to review its slices.'));
      return;
    }
    if (!viewerDom || viewerDom.scanId !== viewer.scanId) {
      viewerDom = buildViewer(state, viewer);
    }
    syncViewer(state, viewer, viewerDom);
  }

  return {
    render(state: AppState): void {
      renderBanner(state);
      renderSidebar(state);
      renderViewer(state);
    },
    verdictNote(): string {
      return viewerDom ? viewerDom.note.value : '';
    },
  };
}
