/**
 * Entry point: wire the API client, store, and DOM together against the
 * same origin that served this page (the `annotate` service).
 */

import { ApiClient } from './api.js';
import { AnnotatorApp } from './app.js';
import { AnnotationStore } from './store.js';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app mount point');
}

const store = new AnnotationStore(new ApiClient(''));
new AnnotatorApp(root, store).mount();
void store.start();
