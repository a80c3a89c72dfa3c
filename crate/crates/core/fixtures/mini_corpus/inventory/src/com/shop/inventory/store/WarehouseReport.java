package com.shop.inventory.store;

import java.util.List;

// Builds a short text report for a warehouse.
public class WarehouseReport {
    private final Warehouse warehouse;

    public WarehouseReport(Warehouse warehouse) {
        this.warehouse = warehouse;
    }

    public String render(List<String> skus) {
        StringBuilder out = new StringBuilder("Warehouse " + warehouse.getCode());
        for (String sku : skus) {
            if (warehouse.needsReorder(sku)) {
                out.append("\n  reorder ").append(sku);
            }
        }
        return out.toString();
    }
}
