export * from './backoff';
export * from './client';
export * from './impedance';
export * from './ring';
export * from './state';
export * from './wire';
