package com.shop.inventory.store;

import com.shop.inventory.model.*;
import java.util.HashMap;
import java.util.Map;

public class Warehouse {
    private final String code;
    private final Map<String, StockLevel> stock = new HashMap<>();

    public Warehouse(String code) {
        this.code = code;
    }

    public void receive(Item item, int quantity) {
        StockLevel level = stock.computeIfAbsent(item.getSku(), k -> new StockLevel(0));
        level.adjust(quantity);
    }

    public boolean needsReorder(String sku) {
        StockLevel level = stock.get(sku);
        return level == null || level.isLow();
    }

    public String getCode() {
        return code;
    }
}
