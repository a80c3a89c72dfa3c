package com.shop.inventory.store;

import com.shop.inventory.model.Item;
import java.util.HashMap;
import java.util.Map;

public class ItemRepository {
    private final Map<String, Item> items = new HashMap<>();

    public void save(Item item) {
        items.put(item.getSku(), item);
    }

    public Item find(String sku) {
        Item item = items.get(sku);
        if (item == null) {
            throw new IllegalStateException("unknown sku: " + sku);
        }
        return item;
    }

    public int size() {
        return items.size();
    }
}
